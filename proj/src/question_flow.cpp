#include "crowdsurvey/question_flow.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "crowdsurvey/random.hpp"
#include "crowdsurvey/regression.hpp"

namespace crowdsurvey {

std::optional<std::size_t> question_budget(std::size_t n_participants, std::size_t k_questions,
                                           double alpha) {
  const double threshold = alpha * static_cast<double>(n_participants);
  if (static_cast<double>(k_questions) < threshold) return std::nullopt;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(threshold)));
}

std::vector<double> committee_disagreement(const DesignMatrix& design,
                                           const CommitteeConfig& config) {
  if (config.members < 2) {
    throw SurveyError(ErrorCode::InvalidConfig, "a committee needs at least two members");
  }
  const std::size_t n = design.n();
  const std::size_t k = design.k();
  if (n == 0 || k == 0) throw SurveyError(ErrorCode::EmptyDesign, "committee needs a nonempty design");

  const auto members = static_cast<std::size_t>(config.members);
  // powers[j][m]
  std::vector<std::vector<double>> powers(k, std::vector<double>(members));
  std::vector<std::size_t> sample(n);
  std::vector<double> column(n);
  std::vector<double> outcome(n);
  std::vector<bool> mask(n);
  for (std::size_t m = 0; m < members; ++m) {
    Rng rng(config.seed, m);
    for (auto& s : sample) s = static_cast<std::size_t>(rng.index(n));
    for (std::size_t i = 0; i < n; ++i) outcome[i] = design.b(static_cast<Eigen::Index>(sample[i]));
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(sample[i]);
        column[i] = design.a(row, static_cast<Eigen::Index>(j));
        mask[i] = design.answered(row, static_cast<Eigen::Index>(j));
      }
      powers[j][m] = question_power(column, outcome, mask, config.min_samples);
    }
  }

  std::vector<double> scores(k);
  for (std::size_t j = 0; j < k; ++j) {
    double mean = 0.0;
    for (double p : powers[j]) mean += p;
    mean /= static_cast<double>(members);
    double ss = 0.0;
    for (double p : powers[j]) ss += (p - mean) * (p - mean);
    scores[j] = ss / static_cast<double>(members - 1);
  }
  return scores;
}

std::vector<std::pair<QuestionId, double>> committee_disagreement(const Store& store,
                                                                  const CommitteeConfig& config) {
  const auto design = build_design(store, store.last_activity());
  const auto scores = committee_disagreement(design, config);
  std::vector<std::pair<QuestionId, double>> keyed;
  for (std::size_t j = 0; j < design.k(); ++j) keyed.emplace_back(design.cols[j], scores[j]);
  return keyed;
}

OrderingDecision next_questions(const Store& store, ParticipantId pid, Timestamp decided_at) {
  const auto& participant = store.participant(pid);
  const auto& config = store.config();

  OrderingDecision decision;
  decision.participant_id = pid;
  decision.decided_at = decided_at;
  decision.strategy = OrderingStrategy::Chronological;

  // Approved columns are already in (posted_at, id) order.
  const auto approved = approved_columns(store);
  if (participant.withdrawn) return decision;
  for (auto qid : approved) {
    if (!store.response(pid, qid)) decision.question_ids.push_back(qid);
  }

  if (config.ordering_strategy == OrderingStrategy::CommitteeDisagreement &&
      !decision.question_ids.empty()) {
    std::map<QuestionId, double> scores;
    try {
      for (auto [qid, score] : committee_disagreement(
               store, {config.committee_members, config.committee_seed, config.min_samples_for_power})) {
        scores[qid] = score;
      }
      decision.strategy = OrderingStrategy::CommitteeDisagreement;
    } catch (const SurveyError& e) {
      if (e.code() != ErrorCode::EmptyDesign) throw;
    }
    if (decision.strategy == OrderingStrategy::CommitteeDisagreement) {
      std::map<QuestionId, std::size_t> counts;
      for (auto qid : decision.question_ids) counts[qid] = store.response_count(qid);
      // The chronological input order is the final tie-breaker.
      std::stable_sort(decision.question_ids.begin(), decision.question_ids.end(),
                       [&](QuestionId x, QuestionId y) {
                         const double sx = scores[x];
                         const double sy = scores[y];
                         if (sx != sy) return sx > sy;
                         return counts[x] < counts[y];
                       });
    }
  }

  if (config.question_budget_enabled) {
    std::size_t n = 0;
    for (const auto& p : store.participants()) {
      if (!p.withdrawn && p.outcome) ++n;
    }
    decision.budget = question_budget(n, approved.size(), config.budget_alpha);
    if (decision.budget) {
      // The budget caps what a participant answers in total, so questions
      // already answered use up part of it.
      const std::size_t answered = approved.size() - decision.question_ids.size();
      const std::size_t remaining = *decision.budget > answered ? *decision.budget - answered : 0;
      if (decision.question_ids.size() > remaining) decision.question_ids.resize(remaining);
    }
  }
  return decision;
}

}  // namespace crowdsurvey
