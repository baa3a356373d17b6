#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "crowdsurvey/error.hpp"

namespace crowdsurvey {

/// Milliseconds on the study clock (wall clock when serving, virtual in
/// simulations).
using Timestamp = std::int64_t;

constexpr Timestamp kMillisPerSecond = 1000;

template <typename Tag>
struct StrongId {
  std::uint64_t value = 0;

  constexpr StrongId() = default;
  constexpr explicit StrongId(std::uint64_t v) : value(v) {}
  constexpr auto operator<=>(const StrongId&) const = default;
  constexpr bool valid() const { return value != 0; }
};

struct ParticipantTag {};
struct QuestionTag {};

using ParticipantId = StrongId<ParticipantTag>;
using QuestionId = StrongId<QuestionTag>;

// Author id 0 is reserved for the investigator (seed questions).
constexpr ParticipantId kInvestigator{0};

enum class AnswerKind { YesNo, Likert5, Numeric };
enum class QuestionStatus { Pending, Approved, Rejected };
enum class RejectionCode { IdentityRevealing, Profanity, OutcomeCorrelated };
enum class OrderingStrategy { Chronological, CommitteeDisagreement };

std::string_view to_string(AnswerKind kind);
std::string_view to_string(QuestionStatus status);
std::string_view to_string(RejectionCode code);
std::string_view to_string(OrderingStrategy strategy);

// Parsers accept the exact names produced by to_string and throw
// SurveyError(InvalidConfig) otherwise.
AnswerKind parse_answer_kind(std::string_view text);
QuestionStatus parse_question_status(std::string_view text);
RejectionCode parse_rejection_code(std::string_view text);
OrderingStrategy parse_ordering_strategy(std::string_view text);

struct NumericBounds {
  double min = 0.0;
  double max = 0.0;

  bool contains(double v) const { return v >= min && v <= max; }
  bool operator==(const NumericBounds&) const = default;
};

}  // namespace crowdsurvey

template <typename Tag>
struct std::hash<crowdsurvey::StrongId<Tag>> {
  std::size_t operator()(const crowdsurvey::StrongId<Tag>& id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};
