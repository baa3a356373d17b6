#include "crowdsurvey/types.hpp"

#include <array>
#include <utility>

namespace crowdsurvey {
namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view text, const std::array<Enum, N>& values, std::string_view what) {
  for (Enum v : values) {
    if (to_string(v) == text) return v;
  }
  throw SurveyError(ErrorCode::InvalidConfig,
                    "unknown " + std::string(what) + " '" + std::string(text) + "'");
}

}  // namespace

std::string_view to_string(AnswerKind kind) {
  switch (kind) {
    case AnswerKind::YesNo: return "yes_no";
    case AnswerKind::Likert5: return "likert5";
    case AnswerKind::Numeric: return "numeric";
  }
  return "?";
}

std::string_view to_string(QuestionStatus status) {
  switch (status) {
    case QuestionStatus::Pending: return "pending";
    case QuestionStatus::Approved: return "approved";
    case QuestionStatus::Rejected: return "rejected";
  }
  return "?";
}

std::string_view to_string(RejectionCode code) {
  switch (code) {
    case RejectionCode::IdentityRevealing: return "identity_revealing";
    case RejectionCode::Profanity: return "profanity";
    case RejectionCode::OutcomeCorrelated: return "outcome_correlated";
  }
  return "?";
}

std::string_view to_string(OrderingStrategy strategy) {
  switch (strategy) {
    case OrderingStrategy::Chronological: return "chronological";
    case OrderingStrategy::CommitteeDisagreement: return "committee_disagreement";
  }
  return "?";
}

AnswerKind parse_answer_kind(std::string_view text) {
  return parse_enum(text, std::array{AnswerKind::YesNo, AnswerKind::Likert5, AnswerKind::Numeric},
                    "answer kind");
}

QuestionStatus parse_question_status(std::string_view text) {
  return parse_enum(text,
                    std::array{QuestionStatus::Pending, QuestionStatus::Approved,
                               QuestionStatus::Rejected},
                    "question status");
}

RejectionCode parse_rejection_code(std::string_view text) {
  return parse_enum(text,
                    std::array{RejectionCode::IdentityRevealing, RejectionCode::Profanity,
                               RejectionCode::OutcomeCorrelated},
                    "rejection code");
}

OrderingStrategy parse_ordering_strategy(std::string_view text) {
  return parse_enum(
      text, std::array{OrderingStrategy::Chronological, OrderingStrategy::CommitteeDisagreement},
      "ordering strategy");
}

}  // namespace crowdsurvey
