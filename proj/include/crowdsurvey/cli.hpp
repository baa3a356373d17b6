#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace crowdsurvey {

/// Entry point shared by the binary and the tests. args[0] is the program
/// name. Returns 0 on success, 2 on a usage error, 1 on an operational
/// failure; diagnostics go to `err`.
///
///   serve       --config C --log L [--snapshot S] [--host H] [--port P] [--period S]
///   model-once  --log L [--out F]
///   simulate    --spec S --out D [--seed N] [--period S]
///   analyze     --log L --out D [--top M] [--subset ID,ID,...]
///   verify-log  --log L
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace crowdsurvey
