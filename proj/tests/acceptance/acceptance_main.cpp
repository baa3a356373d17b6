// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include <unistd.h>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "crowdsurvey/analytics.hpp"
#include "crowdsurvey/cli.hpp"
#include "crowdsurvey/engine.hpp"
#include "crowdsurvey/event_log.hpp"
#include "crowdsurvey/peer_groups.hpp"
#include "crowdsurvey/random.hpp"
#include "crowdsurvey/regression.hpp"
#include "crowdsurvey/sim.hpp"
#include "oracle/ols_oracle.hpp"
#include "support/scenarios.hpp"

using namespace crowdsurvey;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Outcome power_law() {
  const auto start = Clock::now();
  const auto fit = loglog_fit(scenarios::kBmiTopR2, 20);
  const double elapsed = seconds_since(start);
  const bool ok = std::abs(fit.fit_r2 - 0.994) <= 0.02 && elapsed < 1.0;
  return {ok, fmt::format("fit_r2={:.5f} slope={:.4f} time={:.4f}s", fit.fit_r2, fit.slope, elapsed)};
}

Outcome ols_oracle() {
  double worst_fit = 0.0;
  double worst_power = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    Rng rng(2024, trial);
    const int k = 1 + static_cast<int>(rng.index(5));
    const int n = k + 2 + static_cast<int>(rng.index(20 - (k + 2) + 1));
    Eigen::MatrixXd a(n, k);
    Eigen::VectorXd b(n);
    oracle::Matrix rows(n, std::vector<double>(k));
    std::vector<double> bv(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) rows[i][j] = a(i, j) = rng.uniform(-5.0, 5.0);
      bv[i] = b(i) = rng.uniform(-10.0, 10.0);
    }
    const auto c = fit_least_squares(a, b, 0.0);
    const auto expected = oracle::ols(rows, bv);
    for (int j = 0; j <= k; ++j) {
      worst_fit = std::max(worst_fit, std::abs(c(j) - expected[j]) / std::max(1.0, std::abs(expected[j])));
    }
    std::vector<bool> mask(n, true);
    for (int j = 0; j < k; ++j) {
      std::vector<double> col(n);
      for (int i = 0; i < n; ++i) col[i] = rows[i][j];
      const double d = question_power(col, bv, mask, 3);
      worst_power = std::max(worst_power, std::abs(d - oracle::univariate_r2(col, bv)));
    }
  }
  return {worst_fit <= 1e-9 && worst_power <= 1e-9,
          fmt::format("max rel err c={:.3e} max abs err d={:.3e} over 500 instances", worst_fit, worst_power)};
}

Outcome zero_fill_contract() {
  bool ok = true;
  const std::vector<double> c{1.0, 2.0, 5.0};
  ok &= predict_outcome(c, std::vector<double>{0.0, 0.0}, {false, false}) == 1.0;
  ok &= predict_outcome(c, std::vector<double>{3.0, 9.0}, {true, false}) == 7.0;
  ok &= predict_outcome(std::vector<double>{1.0, 2.0}, std::vector<double>{3.0}, {true}) == 7.0;

  // Through a fitted artifact: a registered participant with no answers
  // gets c0 bit for bit.
  StudyConfig config = bmi_study_defaults();
  Store store(config, 0);
  for (int i = 0; i < 6; ++i) {
    const auto& p = store.register_participant(20.0 + 3 * i, 10 + i);
    store.submit_response(p.id, QuestionId{1}, static_cast<double>(i % 4), 20 + i);
  }
  const auto& silent = store.register_participant(25.0, 100);
  const auto artifact = run_cycle(store, 200, 0);
  ok &= predict_for(store, artifact, silent.id) == artifact.c[0];
  return {ok, fmt::format("c0={} prediction for empty row={}", artifact.c[0],
                          predict_for(store, artifact, silent.id))};
}

Outcome coefficient_recovery() {
  const auto start = Clock::now();
  const auto exact = simulate_run(scenarios::exact_recovery_spec(), sim_study_defaults());
  const auto noisy_spec = scenarios::noisy_recovery_spec();
  const auto noisy = simulate_run(noisy_spec, sim_study_defaults());
  const double elapsed = seconds_since(start);

  const double expected_r2 = 1.0 - noisy_spec.noise_sigma * noisy_spec.noise_sigma / oracle::variance(noisy.outcomes);
  const double r2 = noisy.final_artifact ? noisy.final_artifact->model_r2 : -1.0;
  const bool ok = exact.final_artifact && exact.final_artifact->n == 200 && exact.recovery_max_abs <= 1e-8 &&
                  noisy.final_artifact &&
                  std::abs(r2 - expected_r2) <= 0.05 && elapsed < 30.0;
  return {ok, fmt::format("sigma=0 max|c-c*|={:.3e}; sigma={} r2={:.4f} expected={:.4f}; time={:.2f}s",
                          exact.recovery_max_abs, noisy_spec.noise_sigma, r2, expected_r2, elapsed)};
}

Outcome overfit_regime() {
  const auto result = simulate_run(scenarios::overfit_spec(), sim_study_defaults());
  double early_max = 0.0;
  std::size_t overfit_runs = 0;
  for (std::size_t i = 0; i < result.r2_trajectory.size(); ++i) {
    early_max = std::max(early_max, result.r2_trajectory[i].model_r2);
    if (result.r2_trajectory[i].model_r2 >= 0.99) ++overfit_runs;
  }
  const double final_r2 = result.final_artifact ? result.final_artifact->model_r2 : 1.0;
  return {early_max >= 0.99 && final_r2 < 0.99,
          fmt::format("runs with r2>=0.99: {} of {}; final r2={:.4f} (n={}, k={})", overfit_runs,
                      result.r2_trajectory.size(), final_r2, result.final_artifact->n, result.final_artifact->k)};
}

Outcome peer_group_invariants() {
  int failures = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Rng rng(77, trial);
    const std::size_t n = 1 + rng.index(40);
    std::vector<Participant> people(n);
    for (std::size_t i = 0; i < n; ++i) {
      people[i].id = ParticipantId{i + 1};
      people[i].registered_at = static_cast<Timestamp>(i);
      people[i].outcome = 15.0 + static_cast<double>(rng.index(25));
    }
    const auto& target = people[rng.index(n)];
    const auto groups = build_peer_groups(target, people, 10);

    std::vector<double> below, above;
    for (const auto& p : people) {
      if (p.id == target.id) continue;
      (*p.outcome <= *target.outcome ? below : above).push_back(*p.outcome);
    }
    std::sort(below.begin(), below.end(), std::greater<>());
    std::sort(above.begin(), above.end());
    auto outcome_of = [&](ParticipantId id) { return *people[id.value - 1].outcome; };

    bool ok = groups.lower.size() <= 10 && groups.upper.size() <= 10;
    ok &= groups.lower.size() == std::min<std::size_t>(10, below.size());
    ok &= groups.upper.size() == std::min<std::size_t>(10, above.size());
    std::vector<double> lower, upper;
    for (auto id : groups.lower) lower.push_back(outcome_of(id));
    for (auto id : groups.upper) upper.push_back(outcome_of(id));
    for (double v : lower) ok &= v <= *target.outcome;
    for (double v : upper) ok &= v > *target.outcome;
    std::sort(lower.begin(), lower.end(), std::greater<>());
    std::sort(upper.begin(), upper.end());
    ok &= std::equal(lower.begin(), lower.end(), below.begin());
    ok &= std::equal(upper.begin(), upper.end(), above.begin());
    for (auto id : groups.lower) ok &= id != target.id;
    for (auto id : groups.upper) ok &= id != target.id;
    if (!ok) ++failures;
  }
  return {failures == 0, fmt::format("{} of 200 populations violated an invariant", failures)};
}

Outcome replay_determinism() {
  const auto live = simulate_run(scenarios::mixed_spec(OrderingStrategy::CommitteeDisagreement), sim_study_defaults());
  if (!live.final_artifact) return {false, "simulation published no model"};
  const auto state = replay_log(live.events);
  const auto replayed = serialize_artifact(state.artifacts.back());
  const auto recomputed = serialize_artifact(
      run_cycle(*state.store, live.final_artifact->built_at, live.final_artifact->source_seq));
  const auto expected = serialize_artifact(*live.final_artifact);

  const auto dir = std::filesystem::temp_directory_path() / fmt::format("crowdsurvey-accept-{}", ::getpid());
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "events.jsonl");
    for (const auto& e : live.events) out << event_to_line(e) << '\n';
  }
  std::ostringstream out, err;
  const int status = run_command({"crowdsurvey", "verify-log", "--log", (dir / "events.jsonl").string()}, out, err);
  std::filesystem::remove_all(dir);

  const bool ok = replayed == expected && recomputed == expected && status == 0;
  return {ok, fmt::format("{} events, {} models; replay bytes {}; recompute bytes {}; verify-log exit {}",
                          live.events.size(), live.r2_trajectory.size(), replayed == expected ? "equal" : "DIFFER",
                          recomputed == expected ? "equal" : "DIFFER", status)};
}

Outcome ridge_monotonicity() {
  int violations = 0;
  std::string norms;
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(99, trial);
    const int n = 30, k = 5;
    Eigen::MatrixXd a(n, k);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) a(i, j) = rng.normal();
      b(i) = 2.0 * a(i, 0) - a(i, 3) + rng.normal();
    }
    double previous = std::numeric_limits<double>::infinity();
    for (double lambda : {0.0, 0.1, 1.0, 10.0}) {
      const double norm = fit_least_squares(a, b, lambda).tail(k).norm();
      if (norm > previous) ++violations;
      if (trial == 0) norms += fmt::format("{}{:.4f}", norms.empty() ? "" : " ", norm);
      previous = norm;
    }
  }
  return {violations == 0, fmt::format("first instance |c| = [{}]; {} violations over 20 instances", norms, violations)};
}

Outcome dishonesty() {
  StudyConfig config = bmi_study_defaults();
  Store store(config, 0);
  QuestionDraft hours{"How many hours do you work per week?", AnswerKind::Numeric, std::nullopt, 40.0};
  const auto& author = store.register_participant(24.0, 1);
  const QuestionId qid = store.propose_question(author.id, hours, 2).id;
  store.apply_review(qid, true, std::nullopt, 3);
  for (int i = 0; i < 20; ++i) {
    const auto& p = store.register_participant(20.0 + i, 10 + i);
    store.submit_response(p.id, QuestionId{1}, static_cast<double>(i % 22), 40 + i);
    store.submit_response(p.id, qid, 20.0 + 7 * i, 60 + i);  // up to 153
  }
  store.set_question_bounds(qid, NumericBounds{0, 168});
  const std::size_t clean = dishonesty_scan(store).count();

  std::vector<std::pair<ParticipantId, double>> injected;
  for (double v : {200.0, -5.0, 168.5}) {
    const auto& p = store.register_participant(30.0, 100 + static_cast<Timestamp>(injected.size()));
    store.set_question_bounds(qid, std::nullopt);
    store.submit_response(p.id, qid, v, 200 + static_cast<Timestamp>(injected.size()));
    injected.emplace_back(p.id, v);
  }
  store.set_question_bounds(qid, NumericBounds{0, 168});
  const auto report = dishonesty_scan(store);
  bool all_flagged = report.count() == injected.size();
  for (const auto& [pid, v] : injected) {
    all_flagged &= std::any_of(report.flagged.begin(), report.flagged.end(), [&](const FlaggedResponse& f) {
      return f.participant_id == pid && f.question_id == qid && f.raw_value == v;
    });
  }
  return {clean == 0 && all_flagged,
          fmt::format("in-bounds store flagged {}; injected {} flagged {}", clean, injected.size(), report.count())};
}

}  // namespace

int main() {
  // Keep the report to one line per criterion.
  spdlog::set_level(spdlog::level::warn);
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"power-law fit of the top-20 question r2 values", power_law},
      {"least squares and question power match the OLS oracle", ols_oracle},
      {"zero-fill prediction contract", zero_fill_contract},
      {"coefficient recovery from simulated populations", coefficient_recovery},
      {"overfit regime while questions outnumber participants", overfit_regime},
      {"peer-group invariants on random populations", peer_group_invariants},
      {"log replay reproduces the published model byte for byte", replay_determinism},
      {"ridge shrinks the coefficient norm monotonically", ridge_monotonicity},
      {"dishonesty scan on clean and injected stores", dishonesty},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    if (!outcome.pass) ++failed;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << "  " << c.name << "  (" << outcome.detail << ")\n";
  }
  std::cout << (sizeof(criteria) / sizeof(criteria[0]) - failed) << "/" << sizeof(criteria) / sizeof(criteria[0])
            << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
