#include "crowdsurvey/moderation.hpp"

#include <algorithm>

namespace crowdsurvey {

std::vector<const Question*> list_pending(const Store& store) {
  std::vector<const Question*> pending;
  for (const auto& q : store.questions()) {
    if (q.status == QuestionStatus::Pending) pending.push_back(&q);
  }
  std::stable_sort(pending.begin(), pending.end(), [](const Question* a, const Question* b) {
    return std::tie(a->posted_at, a->id) < std::tie(b->posted_at, b->id);
  });
  return pending;
}

const Question& review_question(Store& store, const ModerationVerdict& verdict) {
  return store.apply_review(verdict.question_id, verdict.verdict == Verdict::Approve,
                            verdict.rejection_code, verdict.reviewed_at);
}

}  // namespace crowdsurvey
