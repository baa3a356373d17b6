#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crowdsurvey/analytics.hpp"
#include "crowdsurvey/event_log.hpp"
#include "crowdsurvey/survey.hpp"

namespace crowdsurvey {

struct SimQuestion {
  Timestamp post_at = 0;  // <= 0 makes it a seed question
  AnswerKind kind = AnswerKind::Numeric;
  std::optional<NumericBounds> bounds;
  double coefficient = 0.0;
  std::string text;
};

struct SimSpec {
  std::uint64_t seed = 0;
  std::size_t n_users = 0;
  Timestamp arrival_interval = 3600 * kMillisPerSecond;
  Timestamp arrival_jitter = 0;  // uniform extra delay in [0, jitter)
  int visits = 1;                // first visit is the arrival
  Timestamp revisit_interval = 86400 * kMillisPerSecond;
  std::vector<SimQuestion> questions;
  double intercept = 0.0;
  double noise_sigma = 0.0;
  double answer_prob = 1.0;
  // Answer probability is scaled by exp(-fatigue_decay * position) where
  // position is the question's place in the list shown at that visit.
  double fatigue_decay = 0.0;
  double dishonest_fraction = 0.0;
  OrderingStrategy strategy = OrderingStrategy::Chronological;
  // Defaults to one engine period after the last scripted action.
  std::optional<Timestamp> end_at;

  /// Throws InvalidSpec.
  void validate() const;
};

/// Reads a spec. Times are given in seconds (`*_s` keys). An optional
/// "study" object patches sim_study_defaults().
struct SimFile {
  SimSpec spec;
  StudyConfig study;
};
SimFile sim_file_from_json(const nlohmann::json& json);
SimFile load_sim_file(const std::filesystem::path& path);

/// Wide outcome range, no question budget, hourly engine.
StudyConfig sim_study_defaults();

struct AgentScript {
  Timestamp arrival = 0;
  std::vector<Timestamp> visits;
  bool dishonest = false;
  double noise = 0.0;
  std::vector<double> latent_answers;     // raw value per spec question
  std::vector<std::vector<double>> coins;  // [visit][question] uniform draws
};

enum class ActionKind { PostQuestion, Visit };

struct ScriptedAction {
  Timestamp at = 0;
  ActionKind kind = ActionKind::Visit;
  std::size_t index = 0;  // question or agent
  int visit = 0;
};

struct PopulationScript {
  std::vector<AgentScript> agents;
  std::vector<ScriptedAction> actions;  // time ordered, posts before visits
  Timestamp end_at = 0;
};

/// Fully determined by the SimSpec. Agents register at arrival without an
/// outcome; their outcome is recorded at the end of their last visit from
/// the answers actually accepted.
PopulationScript synth_population(const SimSpec& spec);

struct DTrajectoryPoint {
  Timestamp at = 0;
  QuestionId question_id;
  double d = 0.0;
};

struct SimResult {
  double recovery_max_abs = 0.0;
  double recovery_rms = 0.0;
  std::vector<QualityPoint> r2_trajectory;
  std::vector<DTrajectoryPoint> d_trajectory;
  ParticipationMatrix participation;  // simulated agents only, arrival order
  std::vector<std::pair<std::int64_t, std::size_t>> responses_per_day;
  std::size_t rejected_responses = 0;
  std::size_t rejected_outcomes = 0;
  std::vector<double> outcomes;  // recorded outcomes, arrival order
  std::vector<QuestionId> question_ids;  // store id of each spec question
  std::optional<ModelArtifact> final_artifact;
  std::vector<Event> events;
};

/// Drives a real Study on a virtual clock. The engine fires at exact
/// multiples of the configured period and once more at end_at. Questions
/// posted after time 0 are proposed by a host participant that never
/// reports an outcome, then approved immediately.
SimResult simulate_run(const SimSpec& spec, const StudyConfig& study_config);

/// Writes quality.csv, d_trajectory.csv, participation.csv,
/// participation.pgm, responses_per_day.csv, recovery.txt and events.jsonl.
void write_sim_result(const std::filesystem::path& dir, const SimResult& result);

}  // namespace crowdsurvey
