#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "crowdsurvey/types.hpp"

namespace crowdsurvey {

struct QuestionDraft {
  std::string text;
  AnswerKind kind = AnswerKind::YesNo;
  std::optional<NumericBounds> bounds;
  // Mandatory for participant proposals; ignored for investigator seeds.
  std::optional<double> proposer_own_answer;
};

struct StudyConfig {
  std::string study_id = "study";
  std::string outcome_label = "outcome";
  std::string outcome_unit;
  double outcome_min = 0.0;
  double outcome_max = 1.0;
  std::vector<QuestionDraft> seed_questions;
  std::int64_t engine_period_s = 300;
  int peer_group_size = 10;
  int min_samples_for_power = 3;
  double ridge_lambda = 0.0;
  bool question_budget_enabled = true;
  double budget_alpha = 0.5;
  double outlier_mad_multiplier = 5.0;
  OrderingStrategy ordering_strategy = OrderingStrategy::Chronological;
  int committee_members = 10;
  std::uint64_t committee_seed = 0;

  /// Throws SurveyError(InvalidConfig) naming the first violated invariant.
  void validate() const;
};

/// BMI study defaults: outcome bounds [10, 80] kg/m^2 and the fast-food seed.
StudyConfig bmi_study_defaults();
/// Monthly household electricity defaults: outcome bounds [0, 10000] kWh.
StudyConfig energy_study_defaults();

struct Participant {
  ParticipantId id;
  Timestamp registered_at = 0;
  std::optional<double> outcome;
  std::optional<std::vector<std::pair<std::string, double>>> outcome_series;
  bool withdrawn = false;
};

struct Question {
  QuestionId id;
  std::string text;
  AnswerKind kind = AnswerKind::YesNo;
  std::optional<NumericBounds> bounds;
  ParticipantId author_id;
  Timestamp posted_at = 0;
  QuestionStatus status = QuestionStatus::Pending;
  bool is_seed = false;
  std::optional<RejectionCode> rejection_code;
  std::optional<Timestamp> reviewed_at;
  // Held back until approval, then becomes the author's Response.
  std::optional<double> proposer_own_answer;
};

struct Response {
  ParticipantId participant_id;
  QuestionId question_id;
  double raw_value = 0.0;
  Timestamp answered_at = 0;
  std::uint32_t revision = 0;
};

using ResponseKey = std::pair<ParticipantId, QuestionId>;

// Metric BMI: kg / m^2.
double compute_bmi_metric(double weight_kg, double height_m);
// Imperial entry as on the BMI site: feet + inches, pounds.
double compute_bmi(int height_ft, double height_in, double weight_lb);

/// Mean over the requested periods present in `series`.
double aggregate_energy_outcome(
    std::span<const std::pair<std::string, double>> series,
    std::span<const std::string> periods);

/// Throws ValueOutOfDomain unless `raw_value` is a legal raw answer:
/// YesNo in {0,1}, Likert5 in {1..5}, Numeric finite and within bounds.
void check_answer_domain(AnswerKind kind, const std::optional<NumericBounds>& bounds,
                         double raw_value);

/// In-memory state of one study. Every mutator validates fully before
/// touching state, so a throwing call leaves the store unchanged. The
/// matching `check_*` members run the same validation without mutating.
class Store {
 public:
  explicit Store(StudyConfig config, Timestamp created_at = 0);

  const StudyConfig& config() const { return config_; }
  void set_config(StudyConfig config);

  std::span<const Participant> participants() const { return participants_; }
  std::span<const Question> questions() const { return questions_; }
  const std::map<ResponseKey, Response>& responses() const { return responses_; }

  const Participant& participant(ParticipantId id) const;
  const Question& question(QuestionId id) const;
  const Participant* find_participant(ParticipantId id) const;
  const Question* find_question(QuestionId id) const;
  const Response* response(ParticipantId pid, QuestionId qid) const;

  ParticipantId next_participant_id() const { return ParticipantId{participants_.size() + 1}; }
  QuestionId next_question_id() const { return QuestionId{questions_.size() + 1}; }

  void check_register(std::optional<double> outcome) const;
  const Participant& register_participant(std::optional<double> outcome, Timestamp at);

  void check_set_outcome(ParticipantId pid, double value) const;
  void set_outcome(ParticipantId pid, double value, Timestamp at,
                   std::optional<std::vector<std::pair<std::string, double>>> series = std::nullopt);

  void check_submit(ParticipantId pid, QuestionId qid, double raw_value) const;
  const Response& submit_response(ParticipantId pid, QuestionId qid, double raw_value, Timestamp at);

  void check_propose(ParticipantId pid, const QuestionDraft& draft) const;
  const Question& propose_question(ParticipantId pid, const QuestionDraft& draft, Timestamp at);

  void check_review(QuestionId qid, bool approve, std::optional<RejectionCode> code) const;
  const Question& apply_review(QuestionId qid, bool approve, std::optional<RejectionCode> code,
                               Timestamp at);

  void check_withdraw(ParticipantId pid) const;
  void withdraw(ParticipantId pid, Timestamp at);

  void check_set_bounds(QuestionId qid, const std::optional<NumericBounds>& bounds) const;
  void set_question_bounds(QuestionId qid, std::optional<NumericBounds> bounds);

  /// Current responses to `qid` from participants who have not withdrawn.
  std::size_t response_count(QuestionId qid) const;

  /// Latest timestamp the store has observed.
  Timestamp last_activity() const { return last_activity_; }

  /// Full state as JSON, and its inverse. restore(snapshot()) is an exact copy.
  nlohmann::json snapshot() const;
  static Store restore(const nlohmann::json& snapshot);

 private:
  Store() = default;

  Participant& mutable_participant(ParticipantId id);
  Question& mutable_question(QuestionId id);
  Question& add_question(const QuestionDraft& draft, ParticipantId author, Timestamp at,
                         QuestionStatus status, bool is_seed);
  void touch(Timestamp at);

  StudyConfig config_;
  std::vector<Participant> participants_;
  std::vector<Question> questions_;
  std::map<ResponseKey, Response> responses_;
  Timestamp last_registered_at_ = -1;
  Timestamp last_posted_at_ = -1;
  Timestamp last_activity_ = 0;
};

}  // namespace crowdsurvey
