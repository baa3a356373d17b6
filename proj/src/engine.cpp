#include "crowdsurvey/engine.hpp"

#include <algorithm>

#include "crowdsurvey/regression.hpp"

namespace crowdsurvey {

std::optional<std::size_t> ModelArtifact::column_of(QuestionId qid) const {
  auto it = std::find(col_ids.begin(), col_ids.end(), qid);
  if (it == col_ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - col_ids.begin());
}

nlohmann::ordered_json artifact_to_json(const ModelArtifact& artifact) {
  nlohmann::ordered_json json;
  json["version"] = ModelArtifact::kVersion;
  json["built_at"] = artifact.built_at;
  json["source_seq"] = artifact.source_seq;
  json["n"] = artifact.n;
  json["k"] = artifact.k;
  json["lambda"] = artifact.lambda;
  auto ids = nlohmann::ordered_json::array();
  for (auto q : artifact.col_ids) ids.push_back(q.value);
  json["col_ids"] = std::move(ids);
  json["c"] = artifact.c;
  json["d"] = artifact.d;
  json["model_r2"] = artifact.model_r2;
  return json;
}

ModelArtifact artifact_from_json(const nlohmann::json& json) {
  if (json.value("version", 0) != ModelArtifact::kVersion) {
    throw SurveyError(ErrorCode::ValidationFailed, "unsupported artifact version");
  }
  ModelArtifact artifact;
  artifact.built_at = json.at("built_at").get<Timestamp>();
  artifact.source_seq = json.at("source_seq").get<std::uint64_t>();
  artifact.n = json.at("n").get<std::size_t>();
  artifact.k = json.at("k").get<std::size_t>();
  artifact.lambda = json.at("lambda").get<double>();
  for (const auto& id : json.at("col_ids")) artifact.col_ids.emplace_back(id.get<std::uint64_t>());
  artifact.c = json.at("c").get<std::vector<double>>();
  artifact.d = json.at("d").get<std::vector<double>>();
  artifact.model_r2 = json.at("model_r2").get<double>();
  if (artifact.c.size() != artifact.k + 1 || artifact.d.size() != artifact.k ||
      artifact.col_ids.size() != artifact.k) {
    throw SurveyError(ErrorCode::ValidationFailed, "artifact vectors disagree with k");
  }
  return artifact;
}

std::string serialize_artifact(const ModelArtifact& artifact) {
  return artifact_to_json(artifact).dump();
}

std::vector<double> power_vector(const DesignMatrix& design, int min_samples) {
  const auto n = design.n();
  std::vector<double> b(design.b.data(), design.b.data() + n);
  std::vector<double> column(n);
  std::vector<bool> mask(n);
  std::vector<double> d;
  d.reserve(design.k());
  for (std::size_t j = 0; j < design.k(); ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const auto c = static_cast<Eigen::Index>(j);
      column[i] = design.a(r, c);
      mask[i] = design.answered(r, c);
    }
    d.push_back(question_power(column, b, mask, min_samples));
  }
  return d;
}

ModelArtifact fit_design(const DesignMatrix& design, double lambda, int min_samples,
                         std::uint64_t source_seq) {
  ModelArtifact artifact;
  artifact.built_at = design.built_at;
  artifact.source_seq = source_seq;
  artifact.n = design.n();
  artifact.k = design.k();
  artifact.lambda = lambda;
  artifact.col_ids = design.cols;

  const Eigen::VectorXd c = fit_least_squares(design.a, design.b, lambda);
  artifact.c.assign(c.data(), c.data() + c.size());
  artifact.d = power_vector(design, min_samples);
  try {
    artifact.model_r2 = model_r2(artifact.c, design.a, design.b);
  } catch (const SurveyError& e) {
    if (e.code() != ErrorCode::DegenerateOutcome) throw;
    artifact.model_r2 = 0.0;
  }
  return artifact;
}

ModelArtifact run_cycle(const Store& store, Timestamp built_at, std::uint64_t source_seq) {
  const auto& config = store.config();
  return fit_design(build_design(store, built_at), config.ridge_lambda,
                    config.min_samples_for_power, source_seq);
}

EncodedRow encoded_row(const Store& store, const ModelArtifact& artifact, ParticipantId pid) {
  EncodedRow row;
  row.values.assign(artifact.k, 0.0);
  row.answered.assign(artifact.k, false);
  for (std::size_t j = 0; j < artifact.k; ++j) {
    const QuestionId qid = artifact.col_ids[j];
    const auto* r = store.response(pid, qid);
    const auto* q = store.find_question(qid);
    if (!r || !q) continue;
    row.values[j] = encode_answer(q->kind, r->raw_value);
    row.answered[j] = true;
  }
  return row;
}

double predict_for(const Store& store, const ModelArtifact& artifact, ParticipantId pid) {
  const auto row = encoded_row(store, artifact, pid);
  return predict_outcome(artifact.c, row.values, row.answered);
}

}  // namespace crowdsurvey
