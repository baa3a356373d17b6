#include "crowdsurvey/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "crowdsurvey/analytics.hpp"
#include "crowdsurvey/config.hpp"
#include "crowdsurvey/design_matrix.hpp"
#include "crowdsurvey/http_api.hpp"
#include "crowdsurvey/sim.hpp"
#include "crowdsurvey/study.hpp"

namespace crowdsurvey {
namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw SurveyError(ErrorCode::StorageFailure, "cannot write " + path.string());
  return out;
}

StudyState replay_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw SurveyError(ErrorCode::StorageFailure, "log not found: " + path.string());
  }
  auto state = replay_log(read_log(path));
  if (!state.store) throw SurveyError(ErrorCode::CorruptLog, "log is empty");
  return state;
}

int serve(const std::optional<std::string>& config_path, const std::string& log_path,
          const std::optional<std::string>& snapshot_path, const std::string& host, int port,
          std::optional<std::int64_t> period, std::ostream& out) {
  // Signals are taken synchronously by this thread; block them before any
  // worker thread exists so the workers inherit the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  StudyOptions options;
  options.log_path = log_path;
  if (snapshot_path) {
    options.snapshot_path = *snapshot_path;
    options.snapshot_every = 1000;
  }
  std::optional<Study> study;
  if (config_path) study.emplace(load_config(*config_path), options);
  else study.emplace(options);
  if (period && *period != study->config().engine_period_s) {
    study->update_config({{"engine_period_s", *period}});
  }

  const char* token = std::getenv("CROWDSURVEY_ADMIN_TOKEN");
  if (!token || !*token) spdlog::warn("CROWDSURVEY_ADMIN_TOKEN not set; admin endpoints are disabled");
  HttpService service(*study, token ? token : "");
  if (!service.bind(host, port)) {
    throw SurveyError(ErrorCode::StorageFailure, fmt::format("cannot listen on {}:{}", host, port));
  }
  EngineScheduler scheduler(*study, study->now());
  scheduler.start();

  std::thread server([&] { service.listen_after_bind(); });
  service.wait_until_ready();
  out << "serving " << study->config().study_id << " on " << host << ':' << port << std::endl;

  int received = 0;
  sigwait(&signals, &received);
  spdlog::info("signal {} received, shutting down", received);
  service.stop();
  server.join();
  scheduler.stop();
  if (snapshot_path) study->write_snapshot();
  return 0;
}

int model_once(const std::string& log_path, const std::optional<std::string>& out_path, std::ostream& out) {
  const auto state = replay_file(log_path);
  const auto artifact = run_cycle(*state.store, state.store->last_activity(), state.last_seq);
  if (out_path) {
    auto file = open_output(*out_path);
    file << serialize_artifact(artifact) << '\n';
  } else {
    out << serialize_artifact(artifact) << '\n';
  }
  return 0;
}

int simulate(const std::string& spec_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
             std::optional<std::int64_t> period, std::ostream& out) {
  auto file = load_sim_file(spec_path);
  if (seed) file.spec.seed = *seed;
  if (period) {
    file.study.engine_period_s = *period;
    file.study.validate();
  }
  const auto result = simulate_run(file.spec, file.study);
  write_sim_result(out_dir, result);
  out << "events=" << result.events.size() << " models=" << result.r2_trajectory.size();
  if (result.final_artifact) out << " final_model_r2=" << result.final_artifact->model_r2;
  out << '\n';
  return 0;
}

int analyze(const std::string& log_path, const std::string& out_dir, std::size_t top,
            const std::vector<std::uint64_t>& subset, std::ostream& out) {
  const auto state = replay_file(log_path);
  const Store& store = *state.store;
  std::optional<ModelArtifact> artifact;
  if (!state.artifacts.empty()) {
    artifact = state.artifacts.back();
  } else {
    try {
      artifact = run_cycle(store, store.last_activity(), state.last_seq);
    } catch (const SurveyError& e) {
      if (e.code() != ErrorCode::EmptyDesign) throw;
    }
  }

  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  const PowerRanking ranking = artifact ? power_ranking(*artifact) : PowerRanking{};
  {
    auto f = open_output(dir / "rankings.csv");
    write_ranking_csv(f, ranking, store);
  }
  {
    auto f = open_output(dir / "powerlaw.txt");
    write_powerlaw_report(f, ranking, top);
  }
  const auto matrix = participation_matrix(store);
  {
    auto f = open_output(dir / "participation.csv");
    write_participation_csv(f, matrix);
  }
  {
    auto f = open_output(dir / "participation.pgm");
    write_participation_pgm(f, matrix);
  }
  {
    auto f = open_output(dir / "quality.csv");
    write_quality_csv(f, model_quality_series(state.artifacts));
  }
  if (artifact) {
    auto f = open_output(dir / "response_power.csv");
    write_response_power_csv(f, response_power_scatter(store, *artifact));
  }
  std::optional<DesignMatrix> design;
  try {
    design = build_design(store, store.last_activity());
  } catch (const SurveyError& e) {
    if (e.code() != ErrorCode::EmptyDesign) throw;
  }
  const auto& config = store.config();
  if (design) {
    auto f = open_output(dir / "model.csv");
    write_model_csv(f, model_report(*design, config.ridge_lambda, config.min_samples_for_power, state.last_seq),
                    store);
  }
  if (!subset.empty()) {
    if (!design) throw SurveyError(ErrorCode::EmptyDesign, "no participant with an outcome");
    std::vector<QuestionId> ids;
    for (auto id : subset) ids.push_back(QuestionId{id});
    auto f = open_output(dir / "subset_model.csv");
    write_model_csv(f,
                    model_report(select_columns(*design, ids), config.ridge_lambda,
                                 config.min_samples_for_power, state.last_seq),
                    store);
  }
  const auto dishonesty = dishonesty_scan(store);
  {
    auto f = open_output(dir / "dishonesty.csv");
    write_dishonesty_csv(f, dishonesty);
  }
  out << "participants=" << matrix.rows.size() << " questions=" << matrix.cols.size()
      << " responses=" << matrix.count() << " flagged=" << dishonesty.count() << '\n';
  return 0;
}

int verify(const std::string& log_path, std::ostream& out, std::ostream& err) {
  const auto events = read_log(log_path);
  const auto report = verify_log(events);
  for (const auto& a : report.artifacts) {
    out << "artifact at seq " << a.event_seq << " (source " << a.source_seq << "): "
        << (a.matches ? "match" : "MISMATCH") << '\n';
  }
  out << "events=" << events.size() << " artifacts=" << report.artifacts.size() << '\n';
  if (!report.ok()) {
    err << "artifact bytes differ from replay\n";
    return 1;
  }
  return 0;
}

// Logs go to stderr so command output on stdout stays machine readable.
// Offline commands only report warnings unless CROWDSURVEY_LOG_LEVEL says
// otherwise.
void configure_logging(bool serving) {
  static const bool installed = [] {
    spdlog::set_default_logger(spdlog::stderr_color_mt("crowdsurvey"));
    return true;
  }();
  (void)installed;
  if (const char* level = std::getenv("CROWDSURVEY_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(level));
  } else {
    spdlog::set_level(serving ? spdlog::level::info : spdlog::level::warn);
  }
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Crowdsourced survey service and analysis tools", args.empty() ? "crowdsurvey" : args[0]};
  app.require_subcommand(1);

  std::optional<std::string> config_path, snapshot_path, out_file;
  std::string log_path, spec_path, out_dir, host = "127.0.0.1";
  int port = 8080;
  std::optional<std::int64_t> period;
  std::optional<std::uint64_t> seed;
  std::size_t top = 20;
  std::vector<std::uint64_t> subset;

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--config", config_path, "Study config (JSON); required for a new log");
  serve_cmd->add_option("--log", log_path, "Event log")->required();
  serve_cmd->add_option("--snapshot", snapshot_path, "Snapshot file");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--period", period, "Engine period override (seconds)")->check(CLI::PositiveNumber);

  auto* model_cmd = app.add_subcommand("model-once", "Fit one model against a log and print the artifact");
  model_cmd->add_option("--log", log_path, "Event log")->required();
  model_cmd->add_option("--out", out_file, "Write the artifact here instead of stdout");

  auto* sim_cmd = app.add_subcommand("simulate", "Run a synthetic population");
  sim_cmd->add_option("--spec", spec_path, "Simulation spec (JSON)")->required();
  sim_cmd->add_option("--out", out_dir, "Output directory")->required();
  sim_cmd->add_option("--seed", seed, "Seed override");
  sim_cmd->add_option("--period", period, "Engine period override (seconds)")->check(CLI::PositiveNumber);

  auto* analyze_cmd = app.add_subcommand("analyze", "Write analytics reports for a log");
  analyze_cmd->add_option("--log", log_path, "Event log")->required();
  analyze_cmd->add_option("--out", out_dir, "Output directory")->required();
  analyze_cmd->add_option("--top", top, "Questions in the power-law fit")->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--subset", subset, "Refit on these question ids (comma separated)")->delimiter(',');

  auto* verify_cmd = app.add_subcommand("verify-log", "Replay a log and check every published model");
  verify_cmd->add_option("--log", log_path, "Event log")->required();

  std::vector<std::string> rest(args.rbegin(), args.rend());
  if (!rest.empty()) rest.pop_back();
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  }

  configure_logging(serve_cmd->parsed());
  try {
    if (serve_cmd->parsed()) return serve(config_path, log_path, snapshot_path, host, port, period, out);
    if (model_cmd->parsed()) return model_once(log_path, out_file, out);
    if (sim_cmd->parsed()) return simulate(spec_path, out_dir, seed, period, out);
    if (analyze_cmd->parsed()) return analyze(log_path, out_dir, top, subset, out);
    if (verify_cmd->parsed()) return verify(log_path, out, err);
  } catch (const SurveyError& e) {
    err << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace crowdsurvey
