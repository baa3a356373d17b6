#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crowdsurvey/survey.hpp"

namespace crowdsurvey {

enum class Verdict { Approve, Reject };

struct ModerationVerdict {
  QuestionId question_id;
  Verdict verdict = Verdict::Approve;
  std::optional<RejectionCode> rejection_code;
  Timestamp reviewed_at = 0;
  std::string reviewer = "investigator";
};

/// Pending questions in posting order. Rejected and approved questions are
/// never listed.
std::vector<const Question*> list_pending(const Store& store);

/// Pending -> Approved activates the proposer's stored answer; Pending ->
/// Rejected keeps the question (and draft) for audit. Any other transition
/// throws AlreadyReviewed; a verdict with a missing or superfluous code
/// throws InvalidVerdict.
const Question& review_question(Store& store, const ModerationVerdict& verdict);

}  // namespace crowdsurvey
