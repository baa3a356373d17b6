#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace crowdsurvey {

enum class ErrorCode {
  OutcomeOutOfRange,
  NonPositiveDimension,
  NoDataForPeriods,
  QuestionNotAnswerable,
  ValueOutOfDomain,
  InvalidDraft,
  AlreadyReviewed,
  InvalidVerdict,
  EmptyDesign,
  DimensionMismatch,
  DegenerateOutcome,
  InsufficientDegreesOfFreedom,
  RankDeficient,
  NoOutcome,
  NonPositiveValue,
  TooFewValues,
  InvalidSpec,
  InvalidConfig,
  ValidationFailed,
  StorageFailure,
  CorruptLog,
  UnknownParticipant,
  UnknownQuestion,
  ParticipantWithdrawn,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutcomeOutOfRange: return "OutcomeOutOfRange";
    case ErrorCode::NonPositiveDimension: return "NonPositiveDimension";
    case ErrorCode::NoDataForPeriods: return "NoDataForPeriods";
    case ErrorCode::QuestionNotAnswerable: return "QuestionNotAnswerable";
    case ErrorCode::ValueOutOfDomain: return "ValueOutOfDomain";
    case ErrorCode::InvalidDraft: return "InvalidDraft";
    case ErrorCode::AlreadyReviewed: return "AlreadyReviewed";
    case ErrorCode::InvalidVerdict: return "InvalidVerdict";
    case ErrorCode::EmptyDesign: return "EmptyDesign";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateOutcome: return "DegenerateOutcome";
    case ErrorCode::InsufficientDegreesOfFreedom: return "InsufficientDegreesOfFreedom";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NoOutcome: return "NoOutcome";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::TooFewValues: return "TooFewValues";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::StorageFailure: return "StorageFailure";
    case ErrorCode::CorruptLog: return "CorruptLog";
    case ErrorCode::UnknownParticipant: return "UnknownParticipant";
    case ErrorCode::UnknownQuestion: return "UnknownQuestion";
    case ErrorCode::ParticipantWithdrawn: return "ParticipantWithdrawn";
  }
  return "Unknown";
}

// Every failure surfaced by the library. `cause` carries the underlying
// domain error when a higher layer re-labels it (e.g. ValidationFailed
// wrapping ValueOutOfDomain at the event log boundary).
class SurveyError : public std::runtime_error {
 public:
  SurveyError(ErrorCode code, const std::string& message,
              std::optional<ErrorCode> cause = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        cause_(cause),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<ErrorCode> cause() const noexcept { return cause_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::optional<ErrorCode> cause_;
  std::string detail_;
};

}  // namespace crowdsurvey
