#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "crowdsurvey/survey.hpp"

namespace crowdsurvey {

// Study configuration file: one JSON object whose keys mirror StudyConfig.
//
//   study_id, outcome_label, outcome_unit       strings
//   outcome_min, outcome_max                    hard plausibility bounds
//   seed_questions                              [{text, kind, bounds?: {min, max}}]
//   engine_period_s                             seconds between model runs
//   peer_group_size, min_samples_for_power      positive integers
//   ridge_lambda                                >= 0
//   question_budget_enabled, budget_alpha       bool, (0, 1]
//   outlier_mad_multiplier                      > 0
//   ordering_strategy                           "chronological" | "committee_disagreement"
//   committee_members, committee_seed           >= 2, unsigned
//
// kind is one of "yes_no", "likert5", "numeric". Missing keys keep their
// defaults; unknown keys are rejected.

nlohmann::json draft_to_json(const QuestionDraft& draft);
QuestionDraft draft_from_json(const nlohmann::json& json);

nlohmann::json config_to_json(const StudyConfig& config);
StudyConfig config_from_json(const nlohmann::json& json);
StudyConfig load_config(const std::filesystem::path& path);

/// Runtime-tunable subset (everything except identity, outcome bounds and
/// seeds). Throws InvalidConfig for unknown or immutable keys.
StudyConfig apply_config_patch(const StudyConfig& base, const nlohmann::json& patch);

}  // namespace crowdsurvey
