#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crowdsurvey/design_matrix.hpp"
#include "crowdsurvey/survey.hpp"

namespace crowdsurvey {

// Output of one modeling run: coefficients c (intercept first), per-question
// power d aligned with col_ids, and the fit's r^2.
struct ModelArtifact {
  static constexpr int kVersion = 1;

  Timestamp built_at = 0;
  // Last event sequence number folded into the store the model was built from.
  std::uint64_t source_seq = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  double lambda = 0.0;
  std::vector<QuestionId> col_ids;
  std::vector<double> c;
  std::vector<double> d;
  double model_r2 = 0.0;

  bool operator==(const ModelArtifact&) const = default;

  /// Index of `qid` in col_ids, if the question was a model column.
  std::optional<std::size_t> column_of(QuestionId qid) const;
};

nlohmann::ordered_json artifact_to_json(const ModelArtifact& artifact);
ModelArtifact artifact_from_json(const nlohmann::json& json);
/// Canonical single-line serialization; equal artifacts give equal bytes.
std::string serialize_artifact(const ModelArtifact& artifact);

/// Per-question power vector d for a design.
std::vector<double> power_vector(const DesignMatrix& design, int min_samples);

/// Fits c, d and r^2 for an already built design.
ModelArtifact fit_design(const DesignMatrix& design, double lambda, int min_samples,
                         std::uint64_t source_seq);

/// Fits the model from the current store state. Pure: the same store, time
/// and sequence number always give a byte-identical artifact. Throws
/// EmptyDesign when there is nothing to fit. A constant outcome yields
/// model_r2 = 0.
ModelArtifact run_cycle(const Store& store, Timestamp built_at, std::uint64_t source_seq = 0);

/// Participant's encoded answer row over the artifact's columns.
struct EncodedRow {
  std::vector<double> values;
  std::vector<bool> answered;
};
EncodedRow encoded_row(const Store& store, const ModelArtifact& artifact, ParticipantId pid);

/// Prediction for one participant from the artifact and their current answers.
double predict_for(const Store& store, const ModelArtifact& artifact, ParticipantId pid);

}  // namespace crowdsurvey
