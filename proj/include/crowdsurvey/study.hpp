#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "crowdsurvey/analytics.hpp"
#include "crowdsurvey/engine.hpp"
#include "crowdsurvey/event_log.hpp"
#include "crowdsurvey/moderation.hpp"
#include "crowdsurvey/peer_groups.hpp"
#include "crowdsurvey/question_flow.hpp"

namespace crowdsurvey {

using Clock = std::function<Timestamp()>;

/// Milliseconds since the Unix epoch.
Timestamp wall_clock_now();

/// Settable clock for simulations and tests.
class VirtualClock {
 public:
  explicit VirtualClock(Timestamp start = 0) : now_(start) {}
  Timestamp now() const { return now_.load(); }
  void set(Timestamp t) { now_.store(t); }
  void advance(Timestamp dt) { now_.fetch_add(dt); }
  Clock as_clock() const {
    return [this] { return now(); };
  }

 private:
  std::atomic<Timestamp> now_;
};

struct StudyOptions {
  std::optional<std::filesystem::path> log_path;
  std::optional<std::filesystem::path> snapshot_path;
  // Write a snapshot after this many appended events (0 = never automatically).
  std::uint64_t snapshot_every = 0;
  Clock clock;                               // defaults to wall_clock_now
  std::function<std::string()> token_source;  // defaults to 128 random bits, hex
};

struct Registration {
  ParticipantId participant_id;
  std::string token;
};

struct SubmitResult {
  bool accepted = false;
  std::optional<double> predicted_outcome;
  std::optional<double> actual_outcome;
};

struct SummaryRow {
  QuestionId question_id;
  std::string text;
  AnswerKind kind = AnswerKind::YesNo;
  std::optional<double> own_answer;
  std::optional<double> lower_group_mean;
  std::optional<double> upper_group_mean;
  std::optional<double> predictive_power;
};

struct RejectedProposal {
  QuestionId question_id;
  std::string text;
  RejectionCode code = RejectionCode::Profanity;
};

struct ParticipantSummary {
  ParticipantId participant_id;
  std::optional<double> actual_outcome;
  std::optional<double> predicted_outcome;
  std::optional<Timestamp> model_built_at;
  std::optional<double> lower_mean_outcome;
  std::optional<double> upper_mean_outcome;
  std::size_t lower_group_size = 0;
  std::size_t upper_group_size = 0;
  std::vector<SummaryRow> rows;
  std::vector<RejectedProposal> rejected_proposals;
};

nlohmann::json summary_to_json(const ParticipantSummary& summary);
nlohmann::json decision_to_json(const OrderingDecision& decision, const Store& store);
nlohmann::json question_to_json(const Question& question);

/// One study behind a single serialized writer. Every state change is an
/// event that is validated, made durable, and only then applied. Readers
/// share the state under a reader lock; the published model is swapped
/// atomically and can be read without touching the state lock.
class Study {
 public:
  /// Starts a new study, or resumes the one recorded at options.log_path
  /// (snapshot first when present). A resumed study keeps its logged
  /// configuration; `config` only seeds a brand new log.
  Study(const StudyConfig& config, StudyOptions options);
  /// Resumes from an existing, non-empty log.
  explicit Study(StudyOptions options);

  Study(const Study&) = delete;
  Study& operator=(const Study&) = delete;

  /// Validates, appends and applies one event stamped with the study clock.
  /// Invalid payloads throw ValidationFailed (cause = the domain error) and
  /// write nothing.
  std::uint64_t append_event(EventKind kind, nlohmann::ordered_json payload);

  Registration register_participant(std::optional<double> outcome);
  std::optional<ParticipantId> authenticate(const std::string& token) const;
  void set_outcome(ParticipantId pid, double value);
  double set_outcome_bmi(ParticipantId pid, int height_ft, double height_in, double weight_lb);
  double set_outcome_series(ParticipantId pid, std::vector<std::pair<std::string, double>> series,
                            std::vector<std::string> periods);
  OrderingDecision next_questions(ParticipantId pid) const;
  SubmitResult submit_response(ParticipantId pid, QuestionId qid, double value);
  QuestionId propose_question(ParticipantId pid, const QuestionDraft& draft);
  ParticipantSummary summary(ParticipantId pid) const;
  void withdraw(ParticipantId pid);

  std::vector<Question> pending_questions() const;
  Question review(const ModerationVerdict& verdict);
  /// Runtime config patch and/or question bounds (see ConfigChanged payload).
  void update_config(const nlohmann::json& change);

  /// One modeling run. Returns nullopt when skipped: another run is in
  /// progress, or there is nothing to fit (the current model stays).
  std::optional<ModelArtifact> run_engine();

  std::shared_ptr<const ModelArtifact> current_artifact() const;
  std::vector<ModelArtifact> artifact_history() const;

  StudyConfig config() const;
  std::uint64_t last_seq() const;
  std::vector<Event> events() const;
  Timestamp now() const { return clock_(); }

  /// Runs `fn(const Store&)` under the reader lock.
  template <typename Fn>
  auto read(Fn&& fn) const {
    std::shared_lock lock(state_mutex_);
    return fn(*state_.store);
  }

  void write_snapshot() const;

 private:
  std::uint64_t append_locked(EventKind kind, nlohmann::ordered_json payload);
  void write_snapshot_locked() const;
  void publish_current(std::shared_ptr<const ModelArtifact> artifact);
  void load(const std::optional<StudyConfig>& config);

  StudyOptions options_;
  Clock clock_;
  mutable std::shared_mutex state_mutex_;
  StudyState state_;
  EventLog log_;
  std::mutex engine_mutex_;
  mutable std::mutex current_mutex_;
  std::shared_ptr<const ModelArtifact> current_;
};

/// Fires Study::run_engine every engine_period_s. The period is re-read
/// after every fire, so configuration changes take effect on the next
/// cycle. Missed fires coalesce into one run.
class EngineScheduler {
 public:
  EngineScheduler(Study& study, Timestamp start);
  ~EngineScheduler();

  Timestamp next_fire() const { return next_fire_.load(); }
  /// Runs the engine if `now` has reached the next fire time. Returns true
  /// when a cycle was attempted.
  bool poll(Timestamp now);

  /// Background thread driven by the study clock.
  void start();
  void stop();

 private:
  Study& study_;
  std::atomic<Timestamp> next_fire_;
  std::thread thread_;
  std::mutex wake_mutex_;
  std::condition_variable wake_;
  bool stopping_ = false;
};

}  // namespace crowdsurvey
