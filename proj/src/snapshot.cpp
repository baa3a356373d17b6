#include <nlohmann/json.hpp>

#include "crowdsurvey/config.hpp"
#include "crowdsurvey/survey.hpp"

namespace crowdsurvey {
namespace {

template <typename T>
nlohmann::json optional_json(const std::optional<T>& value) {
  return value ? nlohmann::json(*value) : nlohmann::json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const nlohmann::json& json, const char* key) {
  if (!json.contains(key) || json.at(key).is_null()) return std::nullopt;
  return json.at(key).get<T>();
}

}  // namespace

nlohmann::json Store::snapshot() const {
  nlohmann::json participants = nlohmann::json::array();
  for (const auto& p : participants_) {
    nlohmann::json series = nullptr;
    if (p.outcome_series) {
      series = nlohmann::json::array();
      for (const auto& [label, value] : *p.outcome_series) series.push_back({label, value});
    }
    participants.push_back({{"id", p.id.value},
                            {"registered_at", p.registered_at},
                            {"outcome", optional_json(p.outcome)},
                            {"outcome_series", series},
                            {"withdrawn", p.withdrawn}});
  }
  nlohmann::json questions = nlohmann::json::array();
  for (const auto& q : questions_) {
    nlohmann::json bounds = nullptr;
    if (q.bounds) bounds = {{"min", q.bounds->min}, {"max", q.bounds->max}};
    questions.push_back(
        {{"id", q.id.value},
         {"text", q.text},
         {"kind", to_string(q.kind)},
         {"bounds", bounds},
         {"author_id", q.author_id.value},
         {"posted_at", q.posted_at},
         {"status", to_string(q.status)},
         {"is_seed", q.is_seed},
         {"rejection_code",
          q.rejection_code ? nlohmann::json(to_string(*q.rejection_code)) : nlohmann::json(nullptr)},
         {"reviewed_at", optional_json(q.reviewed_at)},
         {"proposer_own_answer", optional_json(q.proposer_own_answer)}});
  }
  nlohmann::json responses = nlohmann::json::array();
  for (const auto& [key, r] : responses_) {
    responses.push_back({r.participant_id.value, r.question_id.value, r.raw_value, r.answered_at,
                         r.revision});
  }
  return {{"config", config_to_json(config_)},
          {"participants", std::move(participants)},
          {"questions", std::move(questions)},
          {"responses", std::move(responses)},
          {"last_registered_at", last_registered_at_},
          {"last_posted_at", last_posted_at_},
          {"last_activity", last_activity_}};
}

Store Store::restore(const nlohmann::json& snapshot) {
  try {
    Store store;
    store.config_ = config_from_json(snapshot.at("config"));
    for (const auto& j : snapshot.at("participants")) {
      Participant p;
      p.id = ParticipantId{j.at("id").get<std::uint64_t>()};
      p.registered_at = j.at("registered_at").get<Timestamp>();
      p.outcome = optional_from<double>(j, "outcome");
      if (!j.at("outcome_series").is_null()) {
        std::vector<std::pair<std::string, double>> series;
        for (const auto& entry : j.at("outcome_series")) {
          series.emplace_back(entry.at(0).get<std::string>(), entry.at(1).get<double>());
        }
        p.outcome_series = std::move(series);
      }
      p.withdrawn = j.at("withdrawn").get<bool>();
      if (p.id.value != store.participants_.size() + 1) {
        throw SurveyError(ErrorCode::CorruptLog, "snapshot participant ids are not dense");
      }
      store.participants_.push_back(std::move(p));
    }
    for (const auto& j : snapshot.at("questions")) {
      Question q;
      q.id = QuestionId{j.at("id").get<std::uint64_t>()};
      q.text = j.at("text").get<std::string>();
      q.kind = parse_answer_kind(j.at("kind").get<std::string>());
      if (!j.at("bounds").is_null()) {
        q.bounds = NumericBounds{j.at("bounds").at("min").get<double>(),
                                 j.at("bounds").at("max").get<double>()};
      }
      q.author_id = ParticipantId{j.at("author_id").get<std::uint64_t>()};
      q.posted_at = j.at("posted_at").get<Timestamp>();
      q.status = parse_question_status(j.at("status").get<std::string>());
      q.is_seed = j.at("is_seed").get<bool>();
      if (!j.at("rejection_code").is_null()) {
        q.rejection_code = parse_rejection_code(j.at("rejection_code").get<std::string>());
      }
      q.reviewed_at = optional_from<Timestamp>(j, "reviewed_at");
      q.proposer_own_answer = optional_from<double>(j, "proposer_own_answer");
      if (q.id.value != store.questions_.size() + 1) {
        throw SurveyError(ErrorCode::CorruptLog, "snapshot question ids are not dense");
      }
      store.questions_.push_back(std::move(q));
    }
    for (const auto& j : snapshot.at("responses")) {
      Response r;
      r.participant_id = ParticipantId{j.at(0).get<std::uint64_t>()};
      r.question_id = QuestionId{j.at(1).get<std::uint64_t>()};
      r.raw_value = j.at(2).get<double>();
      r.answered_at = j.at(3).get<Timestamp>();
      r.revision = j.at(4).get<std::uint32_t>();
      store.responses_[{r.participant_id, r.question_id}] = r;
    }
    store.last_registered_at_ = snapshot.at("last_registered_at").get<Timestamp>();
    store.last_posted_at_ = snapshot.at("last_posted_at").get<Timestamp>();
    store.last_activity_ = snapshot.at("last_activity").get<Timestamp>();
    return store;
  } catch (const nlohmann::json::exception& e) {
    throw SurveyError(ErrorCode::CorruptLog, std::string("malformed snapshot: ") + e.what());
  }
}

}  // namespace crowdsurvey
