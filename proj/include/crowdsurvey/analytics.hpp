#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "crowdsurvey/engine.hpp"
#include "crowdsurvey/regression.hpp"
#include "crowdsurvey/survey.hpp"

namespace crowdsurvey {

using PowerRanking = std::vector<std::pair<QuestionId, double>>;

/// Questions by descending d; equal powers keep posting order.
PowerRanking power_ranking(const ModelArtifact& artifact);

/// Descriptive power-law fit: OLS of ln(value_r) on ln(r), r = 1..m. This is
/// a straight-line fit in log-log space, not a tail estimator.
struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;
  double fit_r2 = 0.0;
  std::size_t m = 0;
};

/// Fits the first m of `values` (expected sorted descending). Throws
/// TooFewValues if m < 3 or fewer than m values, NonPositiveValue if any
/// of them is <= 0.
PowerLawFit loglog_fit(std::span<const double> values, std::size_t m);

/// Pearson correlation; absent with fewer than two points or zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct ResponsePowerPoint {
  QuestionId question_id;
  std::size_t responses = 0;
  double d = 0.0;
};

struct ResponsePowerScatter {
  std::vector<ResponsePowerPoint> points;
  std::optional<double> correlation;
};

ResponsePowerScatter response_power_scatter(const Store& store, const ModelArtifact& artifact);

/// Who answered what: rows are non-withdrawn participants by registration,
/// columns approved questions by posting time.
struct ParticipationMatrix {
  std::vector<ParticipantId> rows;
  std::vector<QuestionId> cols;
  std::vector<std::vector<bool>> cells;

  std::size_t count() const;
};

ParticipationMatrix participation_matrix(const Store& store);

struct FlaggedResponse {
  ParticipantId participant_id;
  QuestionId question_id;
  double raw_value = 0.0;
  NumericBounds bounds;
};

struct DishonestyReport {
  std::vector<FlaggedResponse> flagged;
  std::size_t count() const { return flagged.size(); }
};

/// Stored responses outside their question's current theoretical bounds,
/// including bounds added after the answers arrived.
DishonestyReport dishonesty_scan(const Store& store);

struct QualityPoint {
  Timestamp at = 0;
  double model_r2 = 0.0;
};

/// (built_at, model_r2) for each published artifact, in publication order.
std::vector<QualityPoint> model_quality_series(std::span<const ModelArtifact> history);

/// A fitted model with classical significance where the fit allows it.
/// Refitting on a hand-picked column subset (select_columns) reproduces
/// "drop the weakest predictors" style models without a selection rule.
struct ModelReport {
  ModelArtifact artifact;
  std::optional<SignificanceReport> significance;
  std::string significance_status;  // error code name when significance is absent
};

ModelReport model_report(const DesignMatrix& design, double lambda, int min_samples,
                         std::uint64_t source_seq);

// Report writers used by `analyze` and the simulator.
void write_ranking_csv(std::ostream& out, const PowerRanking& ranking, const Store& store);
void write_powerlaw_report(std::ostream& out, const PowerRanking& ranking, std::size_t m);
void write_participation_csv(std::ostream& out, const ParticipationMatrix& matrix);
void write_participation_pgm(std::ostream& out, const ParticipationMatrix& matrix);
void write_quality_csv(std::ostream& out, std::span<const QualityPoint> series);
void write_response_power_csv(std::ostream& out, const ResponsePowerScatter& scatter);
void write_dishonesty_csv(std::ostream& out, const DishonestyReport& report);
void write_model_csv(std::ostream& out, const ModelReport& report, const Store& store);

}  // namespace crowdsurvey
