#include "crowdsurvey/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

#include <fmt/format.h>

#include "crowdsurvey/config.hpp"
#include "crowdsurvey/design_matrix.hpp"
#include "crowdsurvey/random.hpp"
#include "crowdsurvey/study.hpp"

namespace crowdsurvey {
namespace {

constexpr Timestamp kMillisPerDay = 86400 * kMillisPerSecond;

[[noreturn]] void invalid(const std::string& message) {
  throw SurveyError(ErrorCode::InvalidSpec, message);
}

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

Timestamp seconds_to_ms(const nlohmann::json& value, const char* key) {
  if (!value.is_number()) invalid(std::string(key) + " must be a number");
  const double s = value.get<double>();
  if (!std::isfinite(s)) invalid(std::string(key) + " must be finite");
  return static_cast<Timestamp>(std::llround(s * kMillisPerSecond));
}

double host_answer(const SimQuestion& q) {
  switch (q.kind) {
    case AnswerKind::YesNo: return 0.0;
    case AnswerKind::Likert5: return 3.0;
    case AnswerKind::Numeric: return q.bounds ? q.bounds->min : 0.0;
  }
  return 0.0;
}

double draw_answer(Rng& rng, const SimQuestion& q, bool dishonest) {
  switch (q.kind) {
    case AnswerKind::YesNo: return rng.bernoulli(0.5) ? 1.0 : 0.0;
    case AnswerKind::Likert5: return 1.0 + static_cast<double>(rng.index(5));
    case AnswerKind::Numeric:
      if (!q.bounds) return rng.normal();
      if (dishonest) {
        const double half = (q.bounds->max - q.bounds->min) / 2.0;
        return rng.uniform(q.bounds->min - half, q.bounds->max + half);
      }
      return rng.uniform(q.bounds->min, q.bounds->max);
  }
  return 0.0;
}

}  // namespace

void SimSpec::validate() const {
  if (n_users == 0) invalid("n_users must be positive");
  if (arrival_interval < 0 || arrival_jitter < 0 || revisit_interval < 0) {
    invalid("arrival times must be non-negative");
  }
  if (visits < 1) invalid("visits must be at least 1");
  if (!is_probability(answer_prob)) invalid("answer_prob must be in [0, 1]");
  if (!is_probability(dishonest_fraction)) invalid("dishonest_fraction must be in [0, 1]");
  if (!std::isfinite(noise_sigma) || noise_sigma < 0.0) invalid("noise_sigma must be >= 0");
  if (!std::isfinite(fatigue_decay) || fatigue_decay < 0.0) invalid("fatigue_decay must be >= 0");
  if (!std::isfinite(intercept)) invalid("intercept must be finite");
  for (std::size_t j = 0; j < questions.size(); ++j) {
    const auto& q = questions[j];
    if (j > 0 && q.post_at < questions[j - 1].post_at) invalid("question schedule must be nondecreasing");
    if (!std::isfinite(q.coefficient)) invalid("question coefficients must be finite");
    if (q.bounds && q.kind != AnswerKind::Numeric) invalid("only numeric questions take bounds");
    if (q.bounds && !(q.bounds->min < q.bounds->max)) invalid("question bounds must satisfy min < max");
  }
  if (end_at && *end_at < 0) invalid("end_at must be non-negative");
}

StudyConfig sim_study_defaults() {
  StudyConfig config;
  config.study_id = "sim";
  config.outcome_label = "outcome";
  config.outcome_min = -1e9;
  config.outcome_max = 1e9;
  config.engine_period_s = 3600;
  config.question_budget_enabled = false;
  return config;
}

SimFile sim_file_from_json(const nlohmann::json& json) {
  if (!json.is_object()) invalid("sim spec must be a JSON object");
  SimFile file;
  file.study = sim_study_defaults();
  auto& spec = file.spec;
  std::optional<nlohmann::json> study_patch;
  try {
    for (const auto& [key, value] : json.items()) {
      if (key == "seed") spec.seed = value.get<std::uint64_t>();
      else if (key == "n_users") spec.n_users = value.get<std::size_t>();
      else if (key == "arrival_interval_s") spec.arrival_interval = seconds_to_ms(value, "arrival_interval_s");
      else if (key == "arrival_jitter_s") spec.arrival_jitter = seconds_to_ms(value, "arrival_jitter_s");
      else if (key == "visits") spec.visits = value.get<int>();
      else if (key == "revisit_interval_s") spec.revisit_interval = seconds_to_ms(value, "revisit_interval_s");
      else if (key == "intercept") spec.intercept = value.get<double>();
      else if (key == "noise_sigma") spec.noise_sigma = value.get<double>();
      else if (key == "answer_prob") spec.answer_prob = value.get<double>();
      else if (key == "fatigue_decay") spec.fatigue_decay = value.get<double>();
      else if (key == "dishonest_fraction") spec.dishonest_fraction = value.get<double>();
      else if (key == "strategy") spec.strategy = parse_ordering_strategy(value.get<std::string>());
      else if (key == "end_at_s") spec.end_at = seconds_to_ms(value, "end_at_s");
      else if (key == "questions") {
        for (const auto& entry : value) {
          SimQuestion q;
          for (const auto& [qkey, qvalue] : entry.items()) {
            if (qkey == "post_at_s") q.post_at = seconds_to_ms(qvalue, "post_at_s");
            else if (qkey == "kind") q.kind = parse_answer_kind(qvalue.get<std::string>());
            else if (qkey == "coef") q.coefficient = qvalue.get<double>();
            else if (qkey == "text") q.text = qvalue.get<std::string>();
            else if (qkey == "bounds") {
              q.bounds = NumericBounds{qvalue.at("min").get<double>(), qvalue.at("max").get<double>()};
            } else invalid("unknown question key '" + qkey + "'");
          }
          spec.questions.push_back(std::move(q));
        }
      } else if (key == "study") {
        study_patch = value;
      } else {
        invalid("unknown key '" + key + "'");
      }
    }
    for (std::size_t j = 0; j < spec.questions.size(); ++j) {
      if (spec.questions[j].text.empty()) spec.questions[j].text = fmt::format("Synthetic question {}", j + 1);
    }
    if (study_patch) {
      // Seeds come from the schedule, so validate the patched config with them.
      auto seeded = file.study;
      for (const auto& q : spec.questions) {
        if (q.post_at <= 0) seeded.seed_questions.push_back({q.text, q.kind, q.bounds, std::nullopt});
      }
      auto merged = config_to_json(seeded);
      merged.merge_patch(*study_patch);
      file.study = config_from_json(merged);
    }
  } catch (const nlohmann::json::exception& e) {
    invalid(e.what());
  } catch (const SurveyError& e) {
    if (e.code() == ErrorCode::InvalidSpec) throw;
    throw SurveyError(ErrorCode::InvalidSpec, e.detail(), e.code());
  }
  spec.validate();
  return file;
}

SimFile load_sim_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open sim spec " + path.string());
  nlohmann::json json;
  try {
    json = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    invalid(path.string() + ": " + e.what());
  }
  return sim_file_from_json(json);
}

PopulationScript synth_population(const SimSpec& spec) {
  spec.validate();
  PopulationScript script;
  const std::size_t k = spec.questions.size();
  for (std::size_t i = 0; i < spec.n_users; ++i) {
    Rng rng(spec.seed, i + 1);
    AgentScript agent;
    agent.arrival = static_cast<Timestamp>(i + 1) * spec.arrival_interval;
    if (spec.arrival_jitter > 0) agent.arrival += static_cast<Timestamp>(rng.index(spec.arrival_jitter));
    for (int v = 0; v < spec.visits; ++v) agent.visits.push_back(agent.arrival + v * spec.revisit_interval);
    agent.dishonest = rng.uniform01() < spec.dishonest_fraction;
    agent.noise = spec.noise_sigma * rng.normal();
    for (const auto& q : spec.questions) agent.latent_answers.push_back(draw_answer(rng, q, agent.dishonest));
    agent.coins.assign(spec.visits, std::vector<double>(k));
    for (auto& visit : agent.coins) {
      for (auto& coin : visit) coin = rng.uniform01();
    }
    script.agents.push_back(std::move(agent));
  }

  for (std::size_t j = 0; j < k; ++j) {
    if (spec.questions[j].post_at > 0) {
      script.actions.push_back({spec.questions[j].post_at, ActionKind::PostQuestion, j, 0});
    }
  }
  for (std::size_t i = 0; i < script.agents.size(); ++i) {
    for (int v = 0; v < spec.visits; ++v) {
      script.actions.push_back({script.agents[i].visits[v], ActionKind::Visit, i, v});
    }
  }
  std::sort(script.actions.begin(), script.actions.end(), [](const ScriptedAction& a, const ScriptedAction& b) {
    return std::tie(a.at, a.kind, a.index, a.visit) < std::tie(b.at, b.kind, b.index, b.visit);
  });
  script.end_at = script.actions.empty() ? 0 : script.actions.back().at;
  return script;
}

SimResult simulate_run(const SimSpec& spec, const StudyConfig& study_config) {
  const auto script = synth_population(spec);

  StudyConfig config = study_config;
  config.ordering_strategy = spec.strategy;
  config.seed_questions.clear();
  for (const auto& q : spec.questions) {
    if (q.post_at <= 0) config.seed_questions.push_back({q.text, q.kind, q.bounds, std::nullopt});
  }
  config.validate();

  VirtualClock clock(0);
  StudyOptions options;
  options.clock = clock.as_clock();
  std::uint64_t token_counter = 0;
  options.token_source = [&token_counter, seed = spec.seed] {
    return fmt::format("sim-{}-{}", seed, ++token_counter);
  };
  Study study(config, std::move(options));
  EngineScheduler scheduler(study, 0);

  SimResult result;
  const std::size_t k = spec.questions.size();
  result.question_ids.assign(k, QuestionId{0});
  std::unordered_map<QuestionId, std::size_t> spec_index;
  {
    std::uint64_t next_seed_id = 1;
    for (std::size_t j = 0; j < k; ++j) {
      if (spec.questions[j].post_at <= 0) {
        result.question_ids[j] = QuestionId{next_seed_id++};
        spec_index[result.question_ids[j]] = j;
      }
    }
  }

  auto advance_to = [&](Timestamp t) {
    while (scheduler.next_fire() <= t) {
      const Timestamp fire = scheduler.next_fire();
      clock.set(fire);
      scheduler.poll(fire);
    }
    clock.set(t);
  };

  std::optional<ParticipantId> host;
  std::vector<ParticipantId> agent_ids(script.agents.size());
  std::vector<std::vector<bool>> accepted(script.agents.size(), std::vector<bool>(k, false));
  std::map<std::int64_t, std::size_t> per_day;

  for (const auto& action : script.actions) {
    advance_to(action.at);
    if (action.kind == ActionKind::PostQuestion) {
      const auto& q = spec.questions[action.index];
      if (!host) host = study.register_participant(std::nullopt).participant_id;
      const QuestionId qid = study.propose_question(*host, {q.text, q.kind, q.bounds, host_answer(q)});
      study.review({qid, Verdict::Approve, std::nullopt, action.at, "sim"});
      result.question_ids[action.index] = qid;
      spec_index[qid] = action.index;
      continue;
    }

    const auto& agent = script.agents[action.index];
    if (action.visit == 0) agent_ids[action.index] = study.register_participant(std::nullopt).participant_id;
    const ParticipantId pid = agent_ids[action.index];
    const auto decision = study.next_questions(pid);
    for (std::size_t pos = 0; pos < decision.question_ids.size(); ++pos) {
      const auto it = spec_index.find(decision.question_ids[pos]);
      if (it == spec_index.end()) continue;
      const std::size_t j = it->second;
      const double p = spec.answer_prob * std::exp(-spec.fatigue_decay * static_cast<double>(pos));
      if (agent.coins[action.visit][j] >= p) continue;
      try {
        study.submit_response(pid, decision.question_ids[pos], agent.latent_answers[j]);
        accepted[action.index][j] = true;
        ++per_day[action.at / kMillisPerDay];
      } catch (const SurveyError& e) {
        if (e.code() != ErrorCode::ValidationFailed) throw;
        ++result.rejected_responses;
      }
    }

    if (action.visit + 1 == spec.visits) {
      double b = spec.intercept + agent.noise;
      for (std::size_t j = 0; j < k; ++j) {
        if (accepted[action.index][j]) {
          b += spec.questions[j].coefficient * encode_answer(spec.questions[j].kind, agent.latent_answers[j]);
        }
      }
      try {
        study.set_outcome(pid, b);
        result.outcomes.push_back(b);
      } catch (const SurveyError& e) {
        if (e.code() != ErrorCode::ValidationFailed) throw;
        ++result.rejected_outcomes;
      }
    }
  }

  const Timestamp end_at =
      spec.end_at ? std::max(*spec.end_at, script.end_at)
                  : script.end_at + study.config().engine_period_s * kMillisPerSecond;
  advance_to(end_at);
  const auto events = study.events();
  if (events.back().kind != EventKind::ModelPublished) study.run_engine();

  const auto history = study.artifact_history();
  result.r2_trajectory = model_quality_series(history);
  for (const auto& artifact : history) {
    for (std::size_t col = 0; col < artifact.col_ids.size(); ++col) {
      result.d_trajectory.push_back({artifact.built_at, artifact.col_ids[col], artifact.d[col]});
    }
  }
  if (!history.empty()) {
    const auto& final_artifact = history.back();
    result.final_artifact = final_artifact;
    double max_abs = std::abs(final_artifact.c[0] - spec.intercept);
    double sum_sq = max_abs * max_abs;
    for (std::size_t j = 0; j < k; ++j) {
      const auto col = final_artifact.column_of(result.question_ids[j]);
      const double fitted = col ? final_artifact.c[*col + 1] : 0.0;
      const double err = std::abs(fitted - spec.questions[j].coefficient);
      max_abs = std::max(max_abs, err);
      sum_sq += err * err;
    }
    result.recovery_max_abs = max_abs;
    result.recovery_rms = std::sqrt(sum_sq / static_cast<double>(k + 1));
  }

  auto participation = study.read([](const Store& store) { return participation_matrix(store); });
  for (std::size_t r = 0; r < participation.rows.size(); ++r) {
    if (host && participation.rows[r] == *host) continue;
    result.participation.rows.push_back(participation.rows[r]);
    result.participation.cells.push_back(participation.cells[r]);
  }
  result.participation.cols = participation.cols;
  result.responses_per_day.assign(per_day.begin(), per_day.end());
  result.events = study.events();
  return result;
}

void write_sim_result(const std::filesystem::path& dir, const SimResult& result) {
  std::filesystem::create_directories(dir);
  auto open = [&dir](const char* name) {
    std::ofstream out(dir / name, std::ios::trunc);
    if (!out) throw SurveyError(ErrorCode::StorageFailure, "cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("quality.csv");
    write_quality_csv(out, result.r2_trajectory);
  }
  {
    auto out = open("d_trajectory.csv");
    out << "timestamp_ms,question_id,d\n";
    for (const auto& p : result.d_trajectory) out << fmt::format("{},{},{:.17g}\n", p.at, p.question_id.value, p.d);
  }
  {
    auto out = open("participation.csv");
    write_participation_csv(out, result.participation);
  }
  {
    auto out = open("participation.pgm");
    write_participation_pgm(out, result.participation);
  }
  {
    auto out = open("responses_per_day.csv");
    out << "day,responses\n";
    for (const auto& [day, count] : result.responses_per_day) out << day << ',' << count << '\n';
  }
  {
    auto out = open("recovery.txt");
    out << fmt::format("max_abs_error={:.17g}\nrms_error={:.17g}\n", result.recovery_max_abs, result.recovery_rms);
    out << "rejected_responses=" << result.rejected_responses << '\n';
    out << "rejected_outcomes=" << result.rejected_outcomes << '\n';
    if (result.final_artifact) out << fmt::format("final_model_r2={:.17g}\n", result.final_artifact->model_r2);
  }
  {
    auto out = open("events.jsonl");
    for (const auto& e : result.events) out << event_to_line(e) << '\n';
  }
}

}  // namespace crowdsurvey
