#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "crowdsurvey/design_matrix.hpp"
#include "crowdsurvey/survey.hpp"

namespace crowdsurvey {

struct CommitteeConfig {
  int members = 10;
  std::uint64_t seed = 0;
  int min_samples = 3;
};

struct OrderingDecision {
  ParticipantId participant_id;
  std::vector<QuestionId> question_ids;
  OrderingStrategy strategy = OrderingStrategy::Chronological;
  std::optional<std::size_t> budget;
  Timestamp decided_at = 0;
};

/// Cap on questions shown once the question count reaches alpha * n:
/// floor(alpha * n) clamped to at least 1. No cap while k < alpha * n.
std::optional<std::size_t> question_budget(std::size_t n_participants, std::size_t k_questions,
                                           double alpha);

/// Query-by-committee disagreement per design column. Member m draws a
/// bootstrap sample of n rows (with replacement) from its own stream of
/// `seed`, computes the univariate power of every column on that sample, and
/// the score is the unbiased variance of those powers across members.
std::vector<double> committee_disagreement(const DesignMatrix& design,
                                           const CommitteeConfig& config);

/// Scores keyed by the store's approved columns. Throws EmptyDesign.
std::vector<std::pair<QuestionId, double>> committee_disagreement(const Store& store,
                                                                  const CommitteeConfig& config);

/// Unanswered approved questions for `pid` in presentation order, using
/// the study's configured strategy and budget. Committee ordering falls
/// back to chronological while no design can be built. The budget limits the
/// participant's total answered questions; the shown list is its remainder.
OrderingDecision next_questions(const Store& store, ParticipantId pid, Timestamp decided_at);

}  // namespace crowdsurvey
