#include <algorithm>
#include <sstream>

#include <gtest/gtest.h>

#include "crowdsurvey/analytics.hpp"
#include "crowdsurvey/design_matrix.hpp"
#include "crowdsurvey/peer_groups.hpp"
#include "crowdsurvey/question_flow.hpp"
#include "crowdsurvey/random.hpp"
#include "oracle/ols_oracle.hpp"
#include "support/scenarios.hpp"

using namespace crowdsurvey;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const SurveyError& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a SurveyError";
  return ErrorCode::StorageFailure;
}

StudyConfig open_config(int seeds, AnswerKind kind = AnswerKind::Likert5) {
  StudyConfig config;
  config.outcome_min = 0;
  config.outcome_max = 1000;
  for (int j = 0; j < seeds; ++j) config.seed_questions.push_back({"q" + std::to_string(j + 1), kind, std::nullopt, std::nullopt});
  return config;
}

std::vector<QuestionId> ids(std::initializer_list<std::uint64_t> values) {
  std::vector<QuestionId> out;
  for (auto v : values) out.push_back(QuestionId{v});
  return out;
}

ModelArtifact artifact_with_powers(std::vector<double> d) {
  ModelArtifact artifact;
  artifact.k = d.size();
  for (std::size_t j = 0; j < d.size(); ++j) artifact.col_ids.push_back(QuestionId{j + 1});
  artifact.d = std::move(d);
  artifact.c.assign(artifact.k + 1, 0.0);
  return artifact;
}

// Random store with n participants answering k Likert questions with
// probability 0.8; the outcome depends on the first question.
Store random_store(std::size_t n, int k, std::uint64_t seed) {
  auto config = open_config(k);
  Store store(config);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto pid = store.register_participant(std::nullopt, static_cast<Timestamp>(i)).id;
    double b = 100;
    for (int j = 0; j < k; ++j) {
      if (!rng.bernoulli(0.8)) continue;
      const double v = 1 + static_cast<double>(rng.index(5));
      store.submit_response(pid, QuestionId{static_cast<std::uint64_t>(j + 1)}, v, 1000 + static_cast<Timestamp>(i));
      if (j == 0) b += 10 * v;
    }
    store.set_outcome(pid, b + rng.normal() * 5, 2000 + static_cast<Timestamp>(i));
  }
  return store;
}

}  // namespace

TEST(PeerGroups, SmallPopulationUsesEveryone) {
  Store store(open_config(1));
  for (double b : {10.0, 20.0, 30.0, 40.0}) store.register_participant(b, 1);
  const auto groups = build_peer_groups(store, ParticipantId{3});
  EXPECT_EQ(groups.lower, (std::vector<ParticipantId>{ParticipantId{2}, ParticipantId{1}}));
  EXPECT_EQ(groups.upper, (std::vector<ParticipantId>{ParticipantId{4}}));
  EXPECT_EQ(groups.lower_mean_outcome, 15.0);
  EXPECT_EQ(groups.upper_mean_outcome, 40.0);
}

TEST(PeerGroups, AloneAndMissingOutcome) {
  Store store(open_config(1));
  store.register_participant(22.0, 1);
  store.register_participant(std::nullopt, 2);
  const auto groups = build_peer_groups(store, ParticipantId{1});
  EXPECT_TRUE(groups.lower.empty());
  EXPECT_TRUE(groups.upper.empty());
  EXPECT_FALSE(groups.lower_mean_outcome);
  EXPECT_EQ(code_of([&] { build_peer_groups(store, ParticipantId{2}); }), ErrorCode::NoOutcome);
}

TEST(PeerGroups, CapsAtGroupSizeNearestFirst) {
  Store store(open_config(1));
  for (int i = 0; i < 25; ++i) store.register_participant(10.0 + i, i);
  const auto target = store.register_participant(100.0, 30).id;
  const auto groups = build_peer_groups(store, target);
  ASSERT_EQ(groups.lower.size(), 10u);
  for (std::size_t r = 0; r < 10; ++r) EXPECT_EQ(groups.lower[r], ParticipantId{25 - r});
}

TEST(PeerGroups, TiesGoLowerAndWithdrawnExcluded) {
  Store store(open_config(1));
  store.register_participant(30.0, 1);
  store.register_participant(30.0, 2);
  const auto gone = store.register_participant(29.0, 3).id;
  store.withdraw(gone, 4);
  const auto groups = build_peer_groups(store, ParticipantId{1});
  EXPECT_EQ(groups.lower, (std::vector<ParticipantId>{ParticipantId{2}}));
  EXPECT_TRUE(groups.upper.empty());
}

TEST(PeerGroups, QuestionProfile) {
  StudyConfig config = open_config(1, AnswerKind::YesNo);
  config.seed_questions.push_back({"likert", AnswerKind::Likert5, std::nullopt, std::nullopt});
  Store store(config);
  std::vector<ParticipantId> group;
  for (int i = 0; i < 3; ++i) group.push_back(store.register_participant(20.0, i).id);
  store.submit_response(group[0], QuestionId{1}, 1, 5);
  store.submit_response(group[1], QuestionId{1}, 1, 5);
  store.submit_response(group[2], QuestionId{1}, 0, 5);
  store.submit_response(group[0], QuestionId{2}, 2, 5);
  store.submit_response(group[1], QuestionId{2}, 4, 5);
  EXPECT_NEAR(*group_question_profile(store, group, QuestionId{1}), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(group_question_profile(store, group, QuestionId{2}), 3.0);
  EXPECT_FALSE(group_question_profile(store, std::vector<ParticipantId>{group[2]}, QuestionId{2}));
}

TEST(Budget, Formula) {
  EXPECT_EQ(question_budget(10, 12, 0.5), 5u);
  EXPECT_FALSE(question_budget(100, 10, 0.5));
  EXPECT_EQ(question_budget(1, 5, 0.5), 1u);
}

TEST(NextQuestions, ChronologicalUnansweredApproved) {
  auto config = open_config(3);
  config.question_budget_enabled = false;
  Store store(config);
  const auto pid = store.register_participant(50, 1).id;
  EXPECT_EQ(next_questions(store, pid, 2).question_ids, ids({1, 2, 3}));
  const auto pending = store.propose_question(pid, {"new", AnswerKind::YesNo, std::nullopt, 1.0}, 3).id;
  EXPECT_EQ(next_questions(store, pid, 4).question_ids, ids({1, 2, 3}));
  store.apply_review(pending, true, std::nullopt, 5);  // own answer counts as answered
  store.submit_response(pid, QuestionId{2}, 3, 6);
  EXPECT_EQ(next_questions(store, pid, 7).question_ids, ids({1, 3}));
  store.submit_response(pid, QuestionId{1}, 3, 8);
  store.submit_response(pid, QuestionId{3}, 3, 9);
  EXPECT_TRUE(next_questions(store, pid, 10).question_ids.empty());
}

TEST(NextQuestions, BudgetCapsTotalAnswers) {
  auto config = open_config(12);
  config.budget_alpha = 0.5;
  Store store(config);
  for (int i = 0; i < 10; ++i) store.register_participant(10.0 + i, i);
  const auto pid = ParticipantId{1};
  auto decision = next_questions(store, pid, 20);
  EXPECT_EQ(decision.budget, 5u);
  EXPECT_EQ(decision.question_ids.size(), 5u);
  for (std::uint64_t q = 1; q <= 3; ++q) store.submit_response(pid, QuestionId{q}, 3, 30);
  decision = next_questions(store, pid, 40);
  EXPECT_EQ(decision.question_ids, ids({4, 5}));
  store.submit_response(pid, QuestionId{4}, 3, 50);
  store.submit_response(pid, QuestionId{5}, 3, 51);
  EXPECT_TRUE(next_questions(store, pid, 60).question_ids.empty());
}

TEST(NextQuestions, WithdrawnGetsNothing) {
  Store store(open_config(2));
  const auto pid = store.register_participant(5, 1).id;
  store.withdraw(pid, 2);
  EXPECT_TRUE(next_questions(store, pid, 3).question_ids.empty());
}

TEST(Committee, MatchesTwoPassOracle) {
  const auto store = random_store(30, 4, 21);
  const auto design = build_design(store, 5000);
  CommitteeConfig cfg{7, 99, 3};
  const auto scores = committee_disagreement(design, cfg);

  const std::size_t n = design.n();
  for (std::size_t j = 0; j < design.k(); ++j) {
    std::vector<double> powers;
    for (int m = 0; m < cfg.members; ++m) {
      Rng rng(cfg.seed, static_cast<std::uint64_t>(m));
      std::vector<double> x, y;
      for (std::size_t s = 0; s < n; ++s) {
        const auto row = static_cast<Eigen::Index>(rng.index(n));
        if (design.answered(row, static_cast<Eigen::Index>(j))) {
          x.push_back(design.a(row, static_cast<Eigen::Index>(j)));
          y.push_back(design.b(row));
        }
      }
      powers.push_back(x.size() >= 3 ? oracle::univariate_r2(x, y) : 0.0);
    }
    // Unbiased sample variance, second pass around the mean.
    double mean = 0;
    for (double p : powers) mean += p;
    mean /= powers.size();
    double ss = 0;
    for (double p : powers) ss += (p - mean) * (p - mean);
    EXPECT_NEAR(scores[j], ss / (powers.size() - 1), 1e-12) << "column " << j;
    EXPECT_GE(scores[j], 0.0);
  }
  EXPECT_EQ(committee_disagreement(design, cfg), scores);
}

TEST(Committee, DegenerateCases) {
  Store store(open_config(2));
  for (int i = 0; i < 6; ++i) {
    const auto pid = store.register_participant(10.0 + i, i).id;
    store.submit_response(pid, QuestionId{1}, 3, 10);  // constant column
    store.submit_response(pid, QuestionId{2}, 1 + i % 5, 10);
  }
  const auto design = build_design(store, 20);
  const auto scores = committee_disagreement(design, {200, 4, 3});
  EXPECT_NEAR(scores[0], 0.0, 1e-6);

  // A single row: every bootstrap sample is identical.
  Store single(open_config(2));
  const auto pid = single.register_participant(10.0, 1).id;
  single.submit_response(pid, QuestionId{1}, 2, 2);
  for (double s : committee_disagreement(build_design(single, 3), {10, 0, 1})) EXPECT_EQ(s, 0.0);

  EXPECT_EQ(code_of([&] { committee_disagreement(design, {1, 0, 3}); }), ErrorCode::InvalidConfig);
}

TEST(Committee, OrderingFollowsScores) {
  auto store = random_store(40, 5, 22);
  auto config = store.config();
  config.ordering_strategy = OrderingStrategy::CommitteeDisagreement;
  config.question_budget_enabled = false;
  store.set_config(config);
  const auto target = store.register_participant(120, 9000).id;
  const auto decision = next_questions(store, target, 9001);
  EXPECT_EQ(decision.strategy, OrderingStrategy::CommitteeDisagreement);

  const auto scores = committee_disagreement(store, {config.committee_members, config.committee_seed,
                                                     config.min_samples_for_power});
  auto expected = scores;
  std::stable_sort(expected.begin(), expected.end(), [&](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    const auto cx = store.response_count(x.first), cy = store.response_count(y.first);
    if (cx != cy) return cx < cy;
    return store.question(x.first).posted_at < store.question(y.first).posted_at;
  });
  std::vector<QuestionId> expected_ids;
  for (const auto& [qid, s] : expected) expected_ids.push_back(qid);
  EXPECT_EQ(decision.question_ids, expected_ids);
}

TEST(Committee, FallsBackToChronologicalWithoutDesign) {
  auto config = open_config(3);
  config.ordering_strategy = OrderingStrategy::CommitteeDisagreement;
  config.question_budget_enabled = false;
  Store store(config);
  const auto pid = store.register_participant(std::nullopt, 1).id;
  const auto decision = next_questions(store, pid, 2);
  EXPECT_EQ(decision.question_ids, ids({1, 2, 3}));
  EXPECT_EQ(decision.strategy, OrderingStrategy::Chronological);
}

TEST(Ranking, SortsDescendingStable) {
  const auto ranking = power_ranking(artifact_with_powers({0.1, 0.3}));
  ASSERT_EQ(ranking.size(), 2u);
  EXPECT_EQ(ranking[0], std::make_pair(QuestionId{2}, 0.3));
  EXPECT_EQ(ranking[1], std::make_pair(QuestionId{1}, 0.1));
  const auto zeros = power_ranking(artifact_with_powers({0, 0, 0}));
  EXPECT_EQ(zeros[0].first, QuestionId{1});
  EXPECT_EQ(zeros[2].first, QuestionId{3});
  const auto table = power_ranking(artifact_with_powers(
      {0.3369, 0.5524, 0.1364, 0.3887}));
  EXPECT_EQ(table[0].second, 0.5524);
  EXPECT_EQ(table[1].second, 0.3887);
  EXPECT_EQ(table[2].second, 0.3369);
}

TEST(PowerLaw, ExactPowerLaw) {
  std::vector<double> v;
  for (int r = 1; r <= 10; ++r) v.push_back(1.0 / (r * r));
  const auto fit = loglog_fit(v, 10);
  EXPECT_NEAR(fit.slope, -2.0, 1e-12);
  EXPECT_NEAR(fit.intercept, 0.0, 1e-12);
  EXPECT_NEAR(fit.fit_r2, 1.0, 1e-12);
}

TEST(PowerLaw, PublishedTopTwenty) {
  const auto fit = loglog_fit(scenarios::kBmiTopR2, 20);
  EXPECT_NEAR(fit.fit_r2, 0.994, 0.02);
}

TEST(PowerLaw, ResponseCountsFitPoorly) {
  auto counts = scenarios::kBmiTopResponses;
  std::sort(counts.begin(), counts.end(), std::greater<>());
  const auto fit = loglog_fit(counts, 20);
  // Reference value from an independent double-precision fit of the same
  // sorted counts.
  EXPECT_NEAR(fit.fit_r2, 0.708686, 1e-5);
  EXPECT_LT(fit.fit_r2, 0.99);
}

TEST(PowerLaw, Errors) {
  const std::vector<double> two{0.5, 0.2};
  EXPECT_EQ(code_of([&] { loglog_fit(two, 2); }), ErrorCode::TooFewValues);
  const std::vector<double> zero{0.5, 0.2, 0.0};
  EXPECT_EQ(code_of([&] { loglog_fit(zero, 3); }), ErrorCode::NonPositiveValue);
}

TEST(Pearson, GuardsAndOracle) {
  EXPECT_FALSE(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{4, 4, 4}));
  EXPECT_NEAR(*pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}), 1.0, 1e-12);
  for (int trial = 0; trial < 50; ++trial) {
    Rng rng(40, trial);
    std::vector<double> x(25), y(25);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = rng.uniform(0, 60);
      y[i] = 0.01 * x[i] + rng.uniform(0, 0.5);
    }
    EXPECT_NEAR(*pearson(x, y), *oracle::pearson(x, y), 1e-9);
  }
}

TEST(Participation, MatrixShape) {
  Store store(open_config(1));
  const auto pid = store.register_participant(5, 1).id;
  store.submit_response(pid, QuestionId{1}, 3, 2);
  auto matrix = participation_matrix(store);
  ASSERT_EQ(matrix.cells.size(), 1u);
  EXPECT_EQ(matrix.cells[0], std::vector<bool>{true});

  store.withdraw(pid, 3);
  const auto other = store.register_participant(6, 4).id;
  matrix = participation_matrix(store);
  ASSERT_EQ(matrix.rows.size(), 1u);
  EXPECT_EQ(matrix.rows[0], other);
  EXPECT_EQ(matrix.count(), 0u);

  std::ostringstream csv, pgm;
  write_participation_csv(csv, matrix);
  write_participation_pgm(pgm, matrix);
  EXPECT_EQ(csv.str(), "participant_id,q1\n2,0\n");
  EXPECT_EQ(pgm.str().substr(0, 2), "P2");
}

TEST(Dishonesty, BoundsAppliedAfterTheFact) {
  auto config = open_config(1, AnswerKind::Numeric);
  config.seed_questions.push_back({"free", AnswerKind::Numeric, std::nullopt, std::nullopt});
  Store store(config);
  const auto a = store.register_participant(5, 1).id;
  const auto b = store.register_participant(6, 2).id;
  store.submit_response(a, QuestionId{1}, 40, 3);
  store.submit_response(b, QuestionId{1}, 200, 4);
  store.submit_response(b, QuestionId{2}, 1e9, 5);
  EXPECT_EQ(dishonesty_scan(store).count(), 0u);
  store.set_question_bounds(QuestionId{1}, NumericBounds{0, 168});
  const auto report = dishonesty_scan(store);
  ASSERT_EQ(report.count(), 1u);
  EXPECT_EQ(report.flagged[0].participant_id, b);
  EXPECT_EQ(report.flagged[0].raw_value, 200);
}

TEST(Quality, Series) {
  EXPECT_TRUE(model_quality_series({}).empty());
  std::vector<ModelArtifact> runs(2);
  runs[0].built_at = 10;
  runs[0].model_r2 = 0.9;
  runs[1].built_at = 20;
  runs[1].model_r2 = 0.5;
  const auto series = model_quality_series(runs);
  ASSERT_EQ(series.size(), 2u);
  EXPECT_LE(series[0].at, series[1].at);
  EXPECT_EQ(series[1].model_r2, 0.5);
}

TEST(ResponsePower, ProportionalCountsCorrelatePerfectly) {
  Store store(open_config(3));
  for (int i = 0; i < 6; ++i) {
    const auto pid = store.register_participant(10 + i, i).id;
    for (std::uint64_t q = 1; q <= 3; ++q) {
      if (i < static_cast<int>(2 * q)) store.submit_response(pid, QuestionId{q}, 3, 10);
    }
  }
  const auto scatter = response_power_scatter(store, artifact_with_powers({0.1, 0.2, 0.3}));
  ASSERT_TRUE(scatter.correlation);
  EXPECT_NEAR(*scatter.correlation, 1.0, 1e-12);
}
