#include <gtest/gtest.h>

#include "crowdsurvey/config.hpp"
#include "crowdsurvey/moderation.hpp"
#include "crowdsurvey/survey.hpp"

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

QuestionDraft likert(std::string text, std::optional<double> own = 3.0) {
  return {std::move(text), AnswerKind::Likert5, std::nullopt, own};
}

}  // namespace

TEST(Registration, AcceptsInRangeOutcome) {
  Store store(bmi_study_defaults());
  const auto& p = store.register_participant(22.5, 5);
  EXPECT_EQ(p.id, ParticipantId{1});
  EXPECT_EQ(p.outcome, 22.5);
}

TEST(Registration, RejectsOutOfRangeOutcome) {
  Store store(energy_study_defaults());
  EXPECT_EQ(code_of([&] { store.register_participant(46575.0, 1); }), ErrorCode::OutcomeOutOfRange);
  EXPECT_TRUE(store.participants().empty());
}

TEST(Registration, OutcomeMayBeAbsent) {
  Store store(bmi_study_defaults());
  const auto& p = store.register_participant(std::nullopt, 1);
  EXPECT_FALSE(p.outcome);
}

TEST(Registration, TimestampsStrictlyIncrease) {
  Store store(bmi_study_defaults());
  const auto t1 = store.register_participant(20.0, 7).registered_at;
  const auto t2 = store.register_participant(21.0, 7).registered_at;
  const auto t3 = store.register_participant(21.0, 3).registered_at;
  EXPECT_LT(t1, t2);
  EXPECT_LT(t2, t3);
}

TEST(Bmi, MetricAndImperial) {
  EXPECT_NEAR(compute_bmi_metric(70.0, 1.75), 70.0 / (1.75 * 1.75), 1e-12);
  EXPECT_NEAR(compute_bmi_metric(70.0, 1.75), 22.857, 0.001);
  // 70 in = 1.778 m, 170 lb = 77.1107029 kg.
  const double expected = 170 * 0.45359237 / std::pow(70 * 0.0254, 2);
  EXPECT_NEAR(compute_bmi(5, 10, 170), expected, 1e-12);
  EXPECT_NEAR(compute_bmi(5, 10, 170), 24.39, 0.01);
}

TEST(Bmi, NonPositiveDimensions) {
  EXPECT_EQ(code_of([] { compute_bmi_metric(70.0, 0.0); }), ErrorCode::NonPositiveDimension);
  EXPECT_EQ(code_of([] { compute_bmi(0, 0.0, 150); }), ErrorCode::NonPositiveDimension);
  EXPECT_EQ(code_of([] { compute_bmi(5, 10, 0); }), ErrorCode::NonPositiveDimension);
}

TEST(EnergyOutcome, MeanOverAvailablePeriods) {
  std::vector<std::pair<std::string, double>> full{{"Jun", 100}, {"Jul", 200}, {"Aug", 300}};
  std::vector<std::string> summer{"Jun", "Jul", "Aug"};
  EXPECT_DOUBLE_EQ(aggregate_energy_outcome(full, summer), 200.0);
  std::vector<std::pair<std::string, double>> partial{{"Jun", 100}};
  EXPECT_DOUBLE_EQ(aggregate_energy_outcome(partial, summer), 100.0);
  std::vector<std::pair<std::string, double>> none;
  std::vector<std::string> june{"Jun"};
  EXPECT_EQ(code_of([&] { aggregate_energy_outcome(none, june); }), ErrorCode::NoDataForPeriods);
}

TEST(Responses, DomainChecks) {
  EXPECT_EQ(code_of([] { check_answer_domain(AnswerKind::Likert5, std::nullopt, 7); }),
            ErrorCode::ValueOutOfDomain);
  EXPECT_EQ(code_of([] { check_answer_domain(AnswerKind::Likert5, std::nullopt, 2.5); }),
            ErrorCode::ValueOutOfDomain);
  EXPECT_EQ(code_of([] { check_answer_domain(AnswerKind::YesNo, std::nullopt, 2); }),
            ErrorCode::ValueOutOfDomain);
  EXPECT_EQ(code_of([] { check_answer_domain(AnswerKind::Numeric, NumericBounds{0, 168}, 200); }),
            ErrorCode::ValueOutOfDomain);
  EXPECT_NO_THROW(check_answer_domain(AnswerKind::Numeric, NumericBounds{0, 168}, 168));
  EXPECT_NO_THROW(check_answer_domain(AnswerKind::Numeric, std::nullopt, -1e6));
}

TEST(Responses, LatestWinsWithRevision) {
  StudyConfig config = bmi_study_defaults();
  config.seed_questions.push_back(likert("I am happy with my life"));
  Store store(config);
  const auto pid = store.register_participant(22.0, 1).id;
  store.submit_response(pid, QuestionId{2}, 2, 2);
  const auto& r = store.submit_response(pid, QuestionId{2}, 3, 3);
  EXPECT_EQ(r.raw_value, 3);
  EXPECT_EQ(r.revision, 1u);
  EXPECT_EQ(store.responses().size(), 1u);
}

TEST(Responses, RejectedSubmissionLeavesStoreUnchanged) {
  Store store(bmi_study_defaults());
  const auto pid = store.register_participant(22.0, 1).id;
  EXPECT_EQ(code_of([&] { store.submit_response(pid, QuestionId{1}, 22, 2); }), ErrorCode::ValueOutOfDomain);
  EXPECT_EQ(code_of([&] { store.submit_response(pid, QuestionId{9}, 1, 2); }), ErrorCode::UnknownQuestion);
  EXPECT_TRUE(store.responses().empty());
}

TEST(Proposals, PendingUntilReviewed) {
  Store store(bmi_study_defaults());
  const auto pid = store.register_participant(22.0, 1).id;
  const auto qid = store.propose_question(pid, likert("I exercise often", 4.0), 2).id;
  EXPECT_EQ(store.question(qid).status, QuestionStatus::Pending);
  EXPECT_EQ(code_of([&] { store.submit_response(pid, qid, 4, 3); }), ErrorCode::QuestionNotAnswerable);
  EXPECT_EQ(store.response(pid, qid), nullptr);
}

TEST(Proposals, InvalidDrafts) {
  Store store(bmi_study_defaults());
  const auto pid = store.register_participant(22.0, 1).id;
  EXPECT_EQ(code_of([&] { store.propose_question(pid, likert("Too low", 0.0), 2); }), ErrorCode::InvalidDraft);
  EXPECT_EQ(code_of([&] { store.propose_question(pid, likert("No answer", std::nullopt), 2); }),
            ErrorCode::InvalidDraft);
  EXPECT_EQ(code_of([&] { store.propose_question(pid, likert("", 3.0), 2); }), ErrorCode::InvalidDraft);
  QuestionDraft bounded_yes_no{"Bounded", AnswerKind::YesNo, NumericBounds{0, 1}, 1.0};
  EXPECT_EQ(code_of([&] { store.propose_question(pid, bounded_yes_no, 2); }), ErrorCode::InvalidDraft);
  EXPECT_EQ(store.questions().size(), 1u);
}

TEST(Moderation, ListsPendingInPostingOrder) {
  Store store(bmi_study_defaults());
  EXPECT_TRUE(list_pending(store).empty());
  const auto pid = store.register_participant(22.0, 1).id;
  const auto q1 = store.propose_question(pid, likert("first"), 10).id;
  const auto q2 = store.propose_question(pid, likert("second"), 20).id;
  const auto q3 = store.propose_question(pid, likert("third"), 30).id;
  review_question(store, {q3, Verdict::Reject, RejectionCode::Profanity, 40, "admin"});
  const auto pending = list_pending(store);
  ASSERT_EQ(pending.size(), 2u);
  EXPECT_EQ(pending[0]->id, q1);
  EXPECT_EQ(pending[1]->id, q2);
}

TEST(Moderation, ApprovalActivatesOwnAnswer) {
  Store store(bmi_study_defaults());
  const auto pid = store.register_participant(22.0, 1).id;
  const auto qid = store.propose_question(pid, likert("I sleep well", 5.0), 10).id;
  const auto posted = store.question(qid).posted_at;
  const auto& q = review_question(store, {qid, Verdict::Approve, std::nullopt, 50, "admin"});
  EXPECT_EQ(q.status, QuestionStatus::Approved);
  EXPECT_EQ(q.posted_at, posted);
  ASSERT_NE(store.response(pid, qid), nullptr);
  EXPECT_EQ(store.response(pid, qid)->raw_value, 5.0);
}

TEST(Moderation, RejectionAndStateMachine) {
  Store store(bmi_study_defaults());
  const auto pid = store.register_participant(22.0, 1).id;
  const QuestionId qid =
      store.propose_question(pid, {"What is your BMI?", AnswerKind::Numeric, std::nullopt, 22.0}, 2).id;
  EXPECT_EQ(code_of([&] { review_question(store, {qid, Verdict::Reject, std::nullopt, 3, "a"}); }),
            ErrorCode::InvalidVerdict);
  EXPECT_EQ(code_of([&] { review_question(store, {qid, Verdict::Approve, RejectionCode::Profanity, 3, "a"}); }),
            ErrorCode::InvalidVerdict);
  const auto& q = review_question(store, {qid, Verdict::Reject, RejectionCode::OutcomeCorrelated, 3, "a"});
  EXPECT_EQ(q.status, QuestionStatus::Rejected);
  EXPECT_EQ(q.rejection_code, RejectionCode::OutcomeCorrelated);
  EXPECT_EQ(store.response(pid, qid), nullptr);
  EXPECT_EQ(code_of([&] { review_question(store, {qid, Verdict::Approve, std::nullopt, 4, "a"}); }),
            ErrorCode::AlreadyReviewed);
  EXPECT_EQ(code_of([&] { review_question(store, {QuestionId{1}, Verdict::Approve, std::nullopt, 4, "a"}); }),
            ErrorCode::AlreadyReviewed);
}

TEST(Withdrawal, BlocksFurtherWrites) {
  Store store(bmi_study_defaults());
  const auto pid = store.register_participant(22.0, 1).id;
  store.submit_response(pid, QuestionId{1}, 2, 2);
  EXPECT_EQ(store.response_count(QuestionId{1}), 1u);
  store.withdraw(pid, 3);
  EXPECT_EQ(store.response_count(QuestionId{1}), 0u);
  EXPECT_EQ(code_of([&] { store.submit_response(pid, QuestionId{1}, 3, 4); }), ErrorCode::ParticipantWithdrawn);
  EXPECT_EQ(code_of([&] { store.withdraw(pid, 4); }), ErrorCode::ParticipantWithdrawn);
}

TEST(Snapshot, RoundTripsExactly) {
  Store store(bmi_study_defaults(), 3);
  const auto a = store.register_participant(22.0, 5).id;
  const auto b = store.register_participant(std::nullopt, 6).id;
  store.submit_response(a, QuestionId{1}, 4, 7);
  store.submit_response(a, QuestionId{1}, 5, 8);
  const auto q = store.propose_question(b, likert("Do you cook?", 2.0), 9).id;
  store.apply_review(q, false, RejectionCode::Profanity, 10);
  store.set_outcome(b, 30.5, 11, std::vector<std::pair<std::string, double>>{{"x", 1.0}});
  store.withdraw(a, 12);
  const auto copy = Store::restore(store.snapshot());
  EXPECT_EQ(copy.snapshot(), store.snapshot());
  EXPECT_EQ(copy.response(a, QuestionId{1})->revision, 1u);
  EXPECT_EQ(copy.question(q).rejection_code, RejectionCode::Profanity);
}

TEST(Config, JsonRoundTripAndStrictKeys) {
  auto config = bmi_study_defaults();
  config.ordering_strategy = OrderingStrategy::CommitteeDisagreement;
  config.ridge_lambda = 0.5;
  const auto json = config_to_json(config);
  EXPECT_EQ(config_to_json(config_from_json(json)), json);

  auto unknown = json;
  unknown["surprise"] = 1;
  EXPECT_EQ(code_of([&] { config_from_json(unknown); }), ErrorCode::InvalidConfig);
  auto bad = json;
  bad["budget_alpha"] = -1;
  EXPECT_EQ(code_of([&] { config_from_json(bad); }), ErrorCode::InvalidConfig);
}

TEST(Config, PatchRejectsImmutableKeys) {
  const auto base = bmi_study_defaults();
  const auto patched = apply_config_patch(base, {{"engine_period_s", 3600}, {"ridge_lambda", 1.0}});
  EXPECT_EQ(patched.engine_period_s, 3600);
  EXPECT_EQ(patched.ridge_lambda, 1.0);
  EXPECT_EQ(code_of([&] { apply_config_patch(base, {{"outcome_max", 100}}); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { apply_config_patch(base, {{"engine_period_s", 0}}); }), ErrorCode::InvalidConfig);
}
