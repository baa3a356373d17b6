#pragma once

#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "crowdsurvey/survey.hpp"

namespace crowdsurvey {

/// Numeric coding used in the model: yes -> +1, no -> -1, Likert l -> l - 3,
/// numeric answers unchanged. Throws ValueOutOfDomain for illegal raw values.
double encode_answer(AnswerKind kind, double raw_value);

struct OutlierSplit {
  std::vector<std::pair<ParticipantId, double>> kept;
  std::vector<std::pair<ParticipantId, double>> excluded;
};

/// Robust exclusion: drops |b - median| > multiplier * 1.4826 * MAD.
/// A zero MAD excludes nothing. Input order is preserved in both halves.
OutlierSplit filter_outliers(std::span<const std::pair<ParticipantId, double>> candidates,
                             double multiplier);

/// The response matrix A (n x k), outcome vector b and the answered mask.
/// Unanswered cells are exactly 0.
struct DesignMatrix {
  std::vector<ParticipantId> rows;
  std::vector<QuestionId> cols;
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> answered;
  Timestamp built_at = 0;
  std::vector<ParticipantId> excluded_outliers;

  std::size_t n() const { return rows.size(); }
  std::size_t k() const { return cols.size(); }
};

/// Approved questions ordered by (posted_at, id).
std::vector<QuestionId> approved_columns(const Store& store);

/// Builds A and b from the current store state. Rows are non-withdrawn
/// participants with an outcome, in registration order, minus statistical
/// outliers. Throws EmptyDesign if no row or no column survives.
DesignMatrix build_design(const Store& store, Timestamp built_at);

/// The same rows restricted to `ids`, in the given order. Throws
/// UnknownQuestion for an id that is not a column and DimensionMismatch for
/// an empty or repeated selection.
DesignMatrix select_columns(const DesignMatrix& design, std::span<const QuestionId> ids);

/// CSV with header `participant_id,outcome,q<id>...`; unanswered cells empty.
void write_design_csv(std::ostream& out, const DesignMatrix& design);

}  // namespace crowdsurvey
