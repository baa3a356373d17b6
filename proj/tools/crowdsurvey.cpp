#include <iostream>

#include "crowdsurvey/cli.hpp"

int main(int argc, char** argv) {
  return crowdsurvey::run_command({argv, argv + argc}, std::cout, std::cerr);
}
