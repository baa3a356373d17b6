#include "crowdsurvey/regression.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "crowdsurvey/error.hpp"

namespace crowdsurvey {
namespace {

void require(bool ok, ErrorCode code, const char* what) {
  if (!ok) throw SurveyError(code, what);
}

bool all_equal(const Eigen::VectorXd& v) {
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) != v(0)) return false;
  }
  return true;
}

}  // namespace

Eigen::VectorXd fit_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                  double lambda) {
  const Eigen::Index n = a.rows();
  const Eigen::Index k = a.cols();
  require(n >= 1, ErrorCode::EmptyDesign, "least squares needs at least one row");
  require(b.size() == n, ErrorCode::DimensionMismatch, "outcome length differs from row count");
  require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::InvalidConfig,
          "lambda must be finite and nonnegative");

  const double b_mean = b.mean();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(k + 1);
  c(0) = b_mean;
  if (k == 0) return c;

  const Eigen::RowVectorXd a_mean = a.colwise().mean();

  // Columns with no spread after centering carry no information; the
  // minimum-norm solution assigns them 0, so leave them out of the solve.
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < k; ++j) {
    if ((a.col(j).array() != a(0, j)).any()) active.push_back(j);
  }
  if (active.empty()) return c;

  const auto m = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd centered(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    centered.col(j) = a.col(active[j]).array() - a_mean(active[j]);
  }
  const Eigen::VectorXd b_centered = b.array() - b_mean;

  Eigen::VectorXd slopes;
  if (lambda == 0.0) {
    slopes = centered.completeOrthogonalDecomposition().solve(b_centered);
  } else {
    // Ridge as an augmented least-squares problem: [A; sqrt(l) I] c = [b; 0].
    Eigen::MatrixXd stacked(n + m, m);
    stacked.topRows(n) = centered;
    stacked.bottomRows(m) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m);
    rhs.head(n) = b_centered;
    slopes = stacked.colPivHouseholderQr().solve(rhs);
  }

  double offset = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    c(active[j] + 1) = slopes(j);
    offset += a_mean(active[j]) * slopes(j);
  }
  c(0) = b_mean - offset;
  return c;
}

double predict_outcome(std::span<const double> c, std::span<const double> row,
                       const std::vector<bool>& answered) {
  require(!c.empty() && c.size() == row.size() + 1 && answered.size() == row.size(),
          ErrorCode::DimensionMismatch, "coefficients, row and mask disagree in length");
  double prediction = c[0];
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (answered[j]) prediction += c[j + 1] * row[j];
  }
  return prediction;
}

double question_power(std::span<const double> column, std::span<const double> b,
                      const std::vector<bool>& answered, int min_samples) {
  require(column.size() == b.size() && answered.size() == b.size(), ErrorCode::DimensionMismatch,
          "column, outcome and mask disagree in length");
  double sum_x = 0.0;
  double sum_y = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!answered[i]) continue;
    sum_x += column[i];
    sum_y += b[i];
    ++count;
  }
  if (count == 0 || count < static_cast<std::size_t>(std::max(min_samples, 1))) return 0.0;

  const double mean_x = sum_x / static_cast<double>(count);
  const double mean_y = sum_y / static_cast<double>(count);
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!answered[i]) continue;
    const double dx = column[i] - mean_x;
    const double dy = b[i] - mean_y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
}

double model_r2(std::span<const double> c, const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  require(b.size() == a.rows() && static_cast<Eigen::Index>(c.size()) == a.cols() + 1,
          ErrorCode::DimensionMismatch, "model and data disagree in shape");
  require(b.size() >= 2 && !all_equal(b), ErrorCode::DegenerateOutcome,
          "r^2 needs at least two distinct outcomes");
  const Eigen::Map<const Eigen::VectorXd> slopes(c.data() + 1, a.cols());
  const Eigen::VectorXd residual = (b - a * slopes).array() - c[0];
  const double sse = residual.squaredNorm();
  const double sst = (b.array() - b.mean()).matrix().squaredNorm();
  return std::clamp(1.0 - sse / sst, 0.0, 1.0);
}

SignificanceReport coeff_significance(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                      std::span<const double> c) {
  const Eigen::Index n = a.rows();
  const Eigen::Index p = a.cols() + 1;
  require(b.size() == n && static_cast<Eigen::Index>(c.size()) == p, ErrorCode::DimensionMismatch,
          "model and data disagree in shape");
  require(n > p, ErrorCode::InsufficientDegreesOfFreedom, "need n > k + 1 for residual variance");

  Eigen::MatrixXd x(n, p);
  x.col(0).setOnes();
  x.rightCols(p - 1) = a;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  require(qr.rank() == p, ErrorCode::RankDeficient, "design lacks full column rank");

  const Eigen::Map<const Eigen::VectorXd> coef(c.data(), p);
  const double sse = (b - x * coef).squaredNorm();
  const int dof = static_cast<int>(n - p);
  const double sigma2 = sse / dof;
  const Eigen::MatrixXd xtx_inv = (x.transpose() * x).ldlt().solve(Eigen::MatrixXd::Identity(p, p));

  const boost::math::students_t dist(dof);
  SignificanceReport report;
  report.degrees_of_freedom = dof;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double se = std::sqrt(std::max(0.0, sigma2 * xtx_inv(j, j)));
    double t = 0.0;
    double pval = 1.0;
    if (se > 0.0) {
      t = coef(j) / se;
      pval = std::isfinite(t) ? 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))) : 0.0;
    } else if (coef(j) != 0.0) {
      t = std::copysign(std::numeric_limits<double>::infinity(), coef(j));
      pval = 0.0;
    }
    report.std_error.push_back(se);
    report.t_stat.push_back(t);
    report.p_value.push_back(std::clamp(pval, 0.0, 1.0));
  }
  return report;
}

}  // namespace crowdsurvey
