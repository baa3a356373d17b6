#include "crowdsurvey/design_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

namespace crowdsurvey {
namespace {

constexpr double kMadToSigma = 1.4826;

double median_of(std::vector<double> values) {
  const auto n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace

double encode_answer(AnswerKind kind, double raw_value) {
  check_answer_domain(kind, std::nullopt, raw_value);
  switch (kind) {
    case AnswerKind::YesNo: return raw_value == 1.0 ? 1.0 : -1.0;
    case AnswerKind::Likert5: return raw_value - 3.0;
    case AnswerKind::Numeric: return raw_value;
  }
  return raw_value;
}

OutlierSplit filter_outliers(std::span<const std::pair<ParticipantId, double>> candidates,
                             double multiplier) {
  OutlierSplit split;
  if (candidates.empty()) return split;

  std::vector<double> values;
  values.reserve(candidates.size());
  for (const auto& c : candidates) values.push_back(c.second);
  const double median = median_of(values);
  for (auto& v : values) v = std::abs(v - median);
  const double mad = median_of(values);

  if (mad == 0.0) {
    split.kept.assign(candidates.begin(), candidates.end());
    return split;
  }
  const double threshold = multiplier * kMadToSigma * mad;
  for (const auto& c : candidates) {
    (std::abs(c.second - median) > threshold ? split.excluded : split.kept).push_back(c);
  }
  return split;
}

std::vector<QuestionId> approved_columns(const Store& store) {
  std::vector<const Question*> approved;
  for (const auto& q : store.questions()) {
    if (q.status == QuestionStatus::Approved) approved.push_back(&q);
  }
  std::sort(approved.begin(), approved.end(), [](const Question* x, const Question* y) {
    return std::tie(x->posted_at, x->id) < std::tie(y->posted_at, y->id);
  });
  std::vector<QuestionId> cols;
  cols.reserve(approved.size());
  for (const auto* q : approved) cols.push_back(q->id);
  return cols;
}

DesignMatrix build_design(const Store& store, Timestamp built_at) {
  std::vector<std::pair<ParticipantId, double>> candidates;
  for (const auto& p : store.participants()) {
    if (!p.withdrawn && p.outcome) candidates.emplace_back(p.id, *p.outcome);
  }
  if (candidates.empty()) throw SurveyError(ErrorCode::EmptyDesign, "no participant with an outcome");

  DesignMatrix design;
  design.cols = approved_columns(store);
  if (design.cols.empty()) throw SurveyError(ErrorCode::EmptyDesign, "no approved question");

  auto split = filter_outliers(candidates, store.config().outlier_mad_multiplier);
  for (const auto& e : split.excluded) design.excluded_outliers.push_back(e.first);

  const auto n = static_cast<Eigen::Index>(split.kept.size());
  const auto k = static_cast<Eigen::Index>(design.cols.size());
  design.built_at = built_at;
  design.a = Eigen::MatrixXd::Zero(n, k);
  design.b.resize(n);
  design.answered.setConstant(n, k, false);
  design.rows.reserve(split.kept.size());

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& [pid, outcome] = split.kept[static_cast<std::size_t>(i)];
    design.rows.push_back(pid);
    design.b(i) = outcome;
    for (Eigen::Index j = 0; j < k; ++j) {
      const QuestionId qid = design.cols[static_cast<std::size_t>(j)];
      if (const auto* r = store.response(pid, qid)) {
        design.a(i, j) = encode_answer(store.question(qid).kind, r->raw_value);
        design.answered(i, j) = true;
      }
    }
  }
  return design;
}

void write_design_csv(std::ostream& out, const DesignMatrix& design) {
  const auto old_precision = out.precision(17);
  out << "participant_id,outcome";
  for (auto q : design.cols) out << ",q" << q.value;
  out << '\n';
  for (std::size_t i = 0; i < design.n(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out << design.rows[i].value << ',' << design.b(row);
    for (std::size_t j = 0; j < design.k(); ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      out << ',';
      if (design.answered(row, col)) out << design.a(row, col);
    }
    out << '\n';
  }
  out.precision(old_precision);
}

DesignMatrix select_columns(const DesignMatrix& design, std::span<const QuestionId> ids) {
  if (ids.empty()) throw SurveyError(ErrorCode::DimensionMismatch, "select at least one question");
  std::vector<Eigen::Index> source;
  for (auto qid : ids) {
    const auto it = std::find(design.cols.begin(), design.cols.end(), qid);
    if (it == design.cols.end()) {
      throw SurveyError(ErrorCode::UnknownQuestion, "question " + std::to_string(qid.value) + " is not a model column");
    }
    const auto j = static_cast<Eigen::Index>(it - design.cols.begin());
    if (std::find(source.begin(), source.end(), j) != source.end()) {
      throw SurveyError(ErrorCode::DimensionMismatch, "question " + std::to_string(qid.value) + " selected twice");
    }
    source.push_back(j);
  }
  DesignMatrix out;
  out.rows = design.rows;
  out.cols.assign(ids.begin(), ids.end());
  out.b = design.b;
  out.built_at = design.built_at;
  out.excluded_outliers = design.excluded_outliers;
  out.a.resize(design.a.rows(), static_cast<Eigen::Index>(source.size()));
  out.answered.resize(design.a.rows(), static_cast<Eigen::Index>(source.size()));
  for (std::size_t j = 0; j < source.size(); ++j) {
    out.a.col(static_cast<Eigen::Index>(j)) = design.a.col(source[j]);
    out.answered.col(static_cast<Eigen::Index>(j)) = design.answered.col(source[j]);
  }
  return out;
}

}  // namespace crowdsurvey
