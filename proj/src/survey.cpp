#include "crowdsurvey/survey.hpp"

#include <algorithm>
#include <cmath>

namespace crowdsurvey {
namespace {

constexpr double kMetersPerInch = 0.0254;
constexpr double kKilogramsPerPound = 0.45359237;

void config_error(const std::string& what) { throw SurveyError(ErrorCode::InvalidConfig, what); }

void check_draft(const QuestionDraft& draft, bool require_own_answer) {
  auto fail = [](const std::string& why) { throw SurveyError(ErrorCode::InvalidDraft, why); };
  if (draft.text.empty()) fail("question text is empty");
  if (draft.bounds) {
    if (draft.kind != AnswerKind::Numeric) fail("bounds are only allowed on numeric questions");
    if (!std::isfinite(draft.bounds->min) || !std::isfinite(draft.bounds->max) ||
        !(draft.bounds->min < draft.bounds->max)) {
      fail("numeric bounds must satisfy min < max");
    }
  }
  if (require_own_answer && !draft.proposer_own_answer) fail("the proposer's own answer is required");
  if (draft.proposer_own_answer) {
    try {
      check_answer_domain(draft.kind, draft.bounds, *draft.proposer_own_answer);
    } catch (const SurveyError& e) {
      fail("own answer: " + e.detail());
    }
  }
}

}  // namespace

void StudyConfig::validate() const {
  if (!std::isfinite(outcome_min) || !std::isfinite(outcome_max) || !(outcome_min < outcome_max)) {
    config_error("outcome_min must be below outcome_max");
  }
  if (peer_group_size < 1) config_error("peer_group_size must be at least 1");
  if (engine_period_s < 1) config_error("engine_period_s must be at least 1 second");
  if (min_samples_for_power < 1) config_error("min_samples_for_power must be positive");
  if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda)) {
    config_error("ridge_lambda must be nonnegative");
  }
  if (!(budget_alpha > 0.0 && budget_alpha <= 1.0)) config_error("budget_alpha must lie in (0, 1]");
  if (!(outlier_mad_multiplier > 0.0)) config_error("outlier_mad_multiplier must be positive");
  if (committee_members < 2) config_error("committee_members must be at least 2");
  if (seed_questions.empty()) config_error("at least one seed question is required");
  for (const auto& draft : seed_questions) {
    try {
      check_draft(draft, false);
    } catch (const SurveyError& e) {
      config_error("seed question '" + draft.text + "': " + e.detail());
    }
  }
}

StudyConfig bmi_study_defaults() {
  StudyConfig config;
  config.study_id = "bmi";
  config.outcome_label = "BMI";
  config.outcome_unit = "kg/m^2";
  config.outcome_min = 10.0;
  config.outcome_max = 80.0;
  config.engine_period_s = 300;
  config.seed_questions.push_back(
      {"How many times a week do you eat fast food?", AnswerKind::Numeric, NumericBounds{0, 21},
       std::nullopt});
  return config;
}

StudyConfig energy_study_defaults() {
  StudyConfig config;
  config.study_id = "energy";
  config.outcome_label = "monthly electricity";
  config.outcome_unit = "kWh";
  config.outcome_min = 0.0;
  config.outcome_max = 10000.0;
  config.engine_period_s = 300;
  config.seed_questions.push_back(
      {"What is the square footage of your house?", AnswerKind::Numeric, std::nullopt, std::nullopt});
  config.seed_questions.push_back(
      {"How many children do you live with?", AnswerKind::Numeric, std::nullopt, std::nullopt});
  return config;
}

double compute_bmi_metric(double weight_kg, double height_m) {
  if (!(weight_kg > 0.0) || !(height_m > 0.0)) {
    throw SurveyError(ErrorCode::NonPositiveDimension, "height and weight must be positive");
  }
  return weight_kg / (height_m * height_m);
}

double compute_bmi(int height_ft, double height_in, double weight_lb) {
  if (height_ft < 0 || height_in < 0.0) {
    throw SurveyError(ErrorCode::NonPositiveDimension, "height components must be nonnegative");
  }
  const double inches = height_ft * 12.0 + height_in;
  return compute_bmi_metric(weight_lb * kKilogramsPerPound, inches * kMetersPerInch);
}

double aggregate_energy_outcome(std::span<const std::pair<std::string, double>> series,
                                std::span<const std::string> periods) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& period : periods) {
    auto it = std::find_if(series.begin(), series.end(),
                           [&](const auto& entry) { return entry.first == period; });
    if (it != series.end()) {
      sum += it->second;
      ++count;
    }
  }
  if (count == 0) throw SurveyError(ErrorCode::NoDataForPeriods, "no readings for the requested periods");
  return sum / static_cast<double>(count);
}

void check_answer_domain(AnswerKind kind, const std::optional<NumericBounds>& bounds,
                         double raw_value) {
  auto fail = [&](const std::string& why) {
    throw SurveyError(ErrorCode::ValueOutOfDomain, why);
  };
  if (!std::isfinite(raw_value)) fail("answer must be a finite number");
  switch (kind) {
    case AnswerKind::YesNo:
      if (raw_value != 0.0 && raw_value != 1.0) fail("yes/no answers must be 0 or 1");
      break;
    case AnswerKind::Likert5:
      if (raw_value < 1.0 || raw_value > 5.0 || raw_value != std::floor(raw_value)) {
        fail("Likert answers must be an integer in 1..5");
      }
      break;
    case AnswerKind::Numeric:
      if (bounds && !bounds->contains(raw_value)) {
        fail("theoretically impossible answer outside [" + std::to_string(bounds->min) + ", " +
             std::to_string(bounds->max) + "]");
      }
      break;
  }
}

Store::Store(StudyConfig config, Timestamp created_at) : config_(std::move(config)) {
  config_.validate();
  last_activity_ = created_at;
  for (const auto& draft : config_.seed_questions) {
    add_question(draft, kInvestigator, created_at, QuestionStatus::Approved, true);
  }
}

void Store::set_config(StudyConfig config) {
  config.validate();
  // Seeds are fixed at creation; later edits to the list are ignored.
  config.seed_questions = config_.seed_questions;
  config_ = std::move(config);
}

const Participant* Store::find_participant(ParticipantId id) const {
  if (id.value == 0 || id.value > participants_.size()) return nullptr;
  return &participants_[id.value - 1];
}

const Question* Store::find_question(QuestionId id) const {
  if (id.value == 0 || id.value > questions_.size()) return nullptr;
  return &questions_[id.value - 1];
}

const Participant& Store::participant(ParticipantId id) const {
  const auto* p = find_participant(id);
  if (!p) throw SurveyError(ErrorCode::UnknownParticipant, "participant " + std::to_string(id.value));
  return *p;
}

const Question& Store::question(QuestionId id) const {
  const auto* q = find_question(id);
  if (!q) throw SurveyError(ErrorCode::UnknownQuestion, "question " + std::to_string(id.value));
  return *q;
}

Participant& Store::mutable_participant(ParticipantId id) {
  return const_cast<Participant&>(participant(id));
}

Question& Store::mutable_question(QuestionId id) { return const_cast<Question&>(question(id)); }

const Response* Store::response(ParticipantId pid, QuestionId qid) const {
  auto it = responses_.find({pid, qid});
  return it == responses_.end() ? nullptr : &it->second;
}

void Store::touch(Timestamp at) { last_activity_ = std::max(last_activity_, at); }

void Store::check_register(std::optional<double> outcome) const {
  if (outcome && !(*outcome >= config_.outcome_min && *outcome <= config_.outcome_max)) {
    throw SurveyError(ErrorCode::OutcomeOutOfRange,
                      "outcome " + std::to_string(*outcome) + " outside [" +
                          std::to_string(config_.outcome_min) + ", " +
                          std::to_string(config_.outcome_max) + "]");
  }
}

const Participant& Store::register_participant(std::optional<double> outcome, Timestamp at) {
  check_register(outcome);
  Participant p;
  p.id = next_participant_id();
  p.registered_at = std::max(at, last_registered_at_ + 1);
  p.outcome = outcome;
  last_registered_at_ = p.registered_at;
  touch(at);
  participants_.push_back(std::move(p));
  return participants_.back();
}

void Store::check_set_outcome(ParticipantId pid, double value) const {
  const auto& p = participant(pid);
  if (p.withdrawn) throw SurveyError(ErrorCode::ParticipantWithdrawn, "participant has withdrawn");
  check_register(value);
}

void Store::set_outcome(ParticipantId pid, double value, Timestamp at,
                        std::optional<std::vector<std::pair<std::string, double>>> series) {
  check_set_outcome(pid, value);
  auto& p = mutable_participant(pid);
  p.outcome = value;
  if (series) p.outcome_series = std::move(series);
  touch(at);
}

void Store::check_submit(ParticipantId pid, QuestionId qid, double raw_value) const {
  const auto& p = participant(pid);
  if (p.withdrawn) throw SurveyError(ErrorCode::ParticipantWithdrawn, "participant has withdrawn");
  const auto& q = question(qid);
  if (q.status != QuestionStatus::Approved) {
    throw SurveyError(ErrorCode::QuestionNotAnswerable,
                      "question " + std::to_string(qid.value) + " is " +
                          std::string(to_string(q.status)));
  }
  check_answer_domain(q.kind, q.bounds, raw_value);
}

const Response& Store::submit_response(ParticipantId pid, QuestionId qid, double raw_value,
                                       Timestamp at) {
  check_submit(pid, qid, raw_value);
  touch(at);
  auto [it, inserted] = responses_.try_emplace({pid, qid});
  Response& r = it->second;
  if (inserted) {
    r.participant_id = pid;
    r.question_id = qid;
  } else {
    ++r.revision;
  }
  r.raw_value = raw_value;
  r.answered_at = at;
  return r;
}

void Store::check_propose(ParticipantId pid, const QuestionDraft& draft) const {
  const auto& p = participant(pid);
  if (p.withdrawn) throw SurveyError(ErrorCode::ParticipantWithdrawn, "participant has withdrawn");
  check_draft(draft, true);
}

const Question& Store::propose_question(ParticipantId pid, const QuestionDraft& draft,
                                        Timestamp at) {
  check_propose(pid, draft);
  return add_question(draft, pid, at, QuestionStatus::Pending, false);
}

Question& Store::add_question(const QuestionDraft& draft, ParticipantId author, Timestamp at,
                              QuestionStatus status, bool is_seed) {
  Question q;
  q.id = next_question_id();
  q.text = draft.text;
  q.kind = draft.kind;
  q.bounds = draft.bounds;
  q.author_id = author;
  q.posted_at = std::max(at, last_posted_at_ + 1);
  q.status = status;
  q.is_seed = is_seed;
  if (!is_seed) q.proposer_own_answer = draft.proposer_own_answer;
  last_posted_at_ = q.posted_at;
  touch(at);
  questions_.push_back(std::move(q));
  return questions_.back();
}

void Store::check_review(QuestionId qid, bool approve, std::optional<RejectionCode> code) const {
  const auto& q = question(qid);
  if (q.status != QuestionStatus::Pending) {
    throw SurveyError(ErrorCode::AlreadyReviewed,
                      "question " + std::to_string(qid.value) + " is already " +
                          std::string(to_string(q.status)));
  }
  if (approve && code) throw SurveyError(ErrorCode::InvalidVerdict, "approval cannot carry a rejection code");
  if (!approve && !code) throw SurveyError(ErrorCode::InvalidVerdict, "rejection requires a code");
}

const Question& Store::apply_review(QuestionId qid, bool approve, std::optional<RejectionCode> code,
                                    Timestamp at) {
  check_review(qid, approve, code);
  auto& q = mutable_question(qid);
  q.reviewed_at = at;
  touch(at);
  if (!approve) {
    q.status = QuestionStatus::Rejected;
    q.rejection_code = code;
    return q;
  }
  q.status = QuestionStatus::Approved;
  const auto* author = find_participant(q.author_id);
  if (q.proposer_own_answer && author && !author->withdrawn) {
    submit_response(q.author_id, q.id, *q.proposer_own_answer, at);
  }
  return q;
}

void Store::check_withdraw(ParticipantId pid) const {
  if (participant(pid).withdrawn) {
    throw SurveyError(ErrorCode::ParticipantWithdrawn, "participant has already withdrawn");
  }
}

void Store::withdraw(ParticipantId pid, Timestamp at) {
  check_withdraw(pid);
  mutable_participant(pid).withdrawn = true;
  touch(at);
}

void Store::check_set_bounds(QuestionId qid, const std::optional<NumericBounds>& bounds) const {
  const auto& q = question(qid);
  if (!bounds) return;
  if (q.kind != AnswerKind::Numeric) {
    throw SurveyError(ErrorCode::InvalidConfig, "bounds are only allowed on numeric questions");
  }
  if (!std::isfinite(bounds->min) || !std::isfinite(bounds->max) || !(bounds->min < bounds->max)) {
    throw SurveyError(ErrorCode::InvalidConfig, "numeric bounds must satisfy min < max");
  }
}

void Store::set_question_bounds(QuestionId qid, std::optional<NumericBounds> bounds) {
  check_set_bounds(qid, bounds);
  mutable_question(qid).bounds = bounds;
}

std::size_t Store::response_count(QuestionId qid) const {
  std::size_t count = 0;
  for (const auto& [key, r] : responses_) {
    if (key.second == qid && !participant(key.first).withdrawn) ++count;
  }
  return count;
}

}  // namespace crowdsurvey
