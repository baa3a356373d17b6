#include "crowdsurvey/config.hpp"

#include <fstream>
#include <set>
#include <string>

namespace crowdsurvey {
namespace {

const std::set<std::string> kImmutableKeys{"study_id", "outcome_label", "outcome_unit",
                                           "outcome_min", "outcome_max", "seed_questions"};

template <typename T>
void read_key(const nlohmann::json& json, const char* key, T& into) {
  if (!json.contains(key)) return;
  try {
    into = json.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw SurveyError(ErrorCode::InvalidConfig, std::string("bad value for '") + key + "'");
  }
}

void apply_keys(StudyConfig& config, const nlohmann::json& json) {
  if (!json.is_object()) throw SurveyError(ErrorCode::InvalidConfig, "configuration must be an object");
  static const std::set<std::string> known{
      "study_id",          "outcome_label",  "outcome_unit",          "outcome_min",
      "outcome_max",       "seed_questions", "engine_period_s",       "peer_group_size",
      "min_samples_for_power", "ridge_lambda", "question_budget_enabled", "budget_alpha",
      "outlier_mad_multiplier", "ordering_strategy", "committee_members", "committee_seed"};
  for (const auto& [key, value] : json.items()) {
    if (!known.contains(key)) throw SurveyError(ErrorCode::InvalidConfig, "unknown key '" + key + "'");
  }
  read_key(json, "study_id", config.study_id);
  read_key(json, "outcome_label", config.outcome_label);
  read_key(json, "outcome_unit", config.outcome_unit);
  read_key(json, "outcome_min", config.outcome_min);
  read_key(json, "outcome_max", config.outcome_max);
  read_key(json, "engine_period_s", config.engine_period_s);
  read_key(json, "peer_group_size", config.peer_group_size);
  read_key(json, "min_samples_for_power", config.min_samples_for_power);
  read_key(json, "ridge_lambda", config.ridge_lambda);
  read_key(json, "question_budget_enabled", config.question_budget_enabled);
  read_key(json, "budget_alpha", config.budget_alpha);
  read_key(json, "outlier_mad_multiplier", config.outlier_mad_multiplier);
  read_key(json, "committee_members", config.committee_members);
  read_key(json, "committee_seed", config.committee_seed);
  if (json.contains("ordering_strategy")) {
    config.ordering_strategy = parse_ordering_strategy(json.at("ordering_strategy").get<std::string>());
  }
  if (json.contains("seed_questions")) {
    config.seed_questions.clear();
    for (const auto& d : json.at("seed_questions")) config.seed_questions.push_back(draft_from_json(d));
  }
}

}  // namespace

nlohmann::json draft_to_json(const QuestionDraft& draft) {
  nlohmann::json json{{"text", draft.text}, {"kind", to_string(draft.kind)}};
  if (draft.bounds) json["bounds"] = {{"min", draft.bounds->min}, {"max", draft.bounds->max}};
  if (draft.proposer_own_answer) json["own_answer"] = *draft.proposer_own_answer;
  return json;
}

QuestionDraft draft_from_json(const nlohmann::json& json) {
  try {
    QuestionDraft draft;
    draft.text = json.at("text").get<std::string>();
    draft.kind = parse_answer_kind(json.at("kind").get<std::string>());
    if (json.contains("bounds") && !json.at("bounds").is_null()) {
      const auto& b = json.at("bounds");
      draft.bounds = NumericBounds{b.at("min").get<double>(), b.at("max").get<double>()};
    }
    if (json.contains("own_answer") && !json.at("own_answer").is_null()) {
      draft.proposer_own_answer = json.at("own_answer").get<double>();
    }
    return draft;
  } catch (const nlohmann::json::exception& e) {
    throw SurveyError(ErrorCode::InvalidDraft, std::string("malformed question: ") + e.what());
  } catch (const SurveyError& e) {
    throw SurveyError(ErrorCode::InvalidDraft, e.detail());
  }
}

nlohmann::json config_to_json(const StudyConfig& config) {
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& d : config.seed_questions) seeds.push_back(draft_to_json(d));
  return {{"study_id", config.study_id},
          {"outcome_label", config.outcome_label},
          {"outcome_unit", config.outcome_unit},
          {"outcome_min", config.outcome_min},
          {"outcome_max", config.outcome_max},
          {"seed_questions", std::move(seeds)},
          {"engine_period_s", config.engine_period_s},
          {"peer_group_size", config.peer_group_size},
          {"min_samples_for_power", config.min_samples_for_power},
          {"ridge_lambda", config.ridge_lambda},
          {"question_budget_enabled", config.question_budget_enabled},
          {"budget_alpha", config.budget_alpha},
          {"outlier_mad_multiplier", config.outlier_mad_multiplier},
          {"ordering_strategy", to_string(config.ordering_strategy)},
          {"committee_members", config.committee_members},
          {"committee_seed", config.committee_seed}};
}

StudyConfig config_from_json(const nlohmann::json& json) {
  StudyConfig config;
  apply_keys(config, json);
  config.validate();
  return config;
}

StudyConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SurveyError(ErrorCode::InvalidConfig, "cannot open " + path.string());
  nlohmann::json json;
  try {
    json = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SurveyError(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  return config_from_json(json);
}

StudyConfig apply_config_patch(const StudyConfig& base, const nlohmann::json& patch) {
  if (!patch.is_object()) throw SurveyError(ErrorCode::InvalidConfig, "patch must be an object");
  for (const auto& [key, value] : patch.items()) {
    if (kImmutableKeys.contains(key)) {
      throw SurveyError(ErrorCode::InvalidConfig, "'" + key + "' cannot change after launch");
    }
  }
  StudyConfig config = base;
  apply_keys(config, patch);
  config.validate();
  return config;
}

}  // namespace crowdsurvey
