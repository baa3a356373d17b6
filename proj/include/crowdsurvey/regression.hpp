#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace crowdsurvey {

/// Linear least squares with an unpenalized intercept:
///   minimize |b - c0 - A c|^2 + lambda |c|^2
/// Returns (c0, c1..ck). With lambda == 0 and a rank-deficient A the slopes
/// are the minimum-norm solution (the lambda -> 0+ limit of the ridge path),
/// so constant and all-zero columns receive exactly 0.
/// Throws EmptyDesign for n == 0, DimensionMismatch if |b| != n.
Eigen::VectorXd fit_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                  double lambda = 0.0);

/// b_hat = c0 + sum over answered j of c_j a_j. Unanswered entries never
/// enter the sum, so a participant with no answers gets exactly c0.
double predict_outcome(std::span<const double> c, std::span<const double> row,
                       const std::vector<bool>& answered);

/// Univariate r^2 of b on one column, restricted to rows where `answered`
/// holds. Returns 0 below `min_samples` or when either side has no variance.
double question_power(std::span<const double> column, std::span<const double> b,
                      const std::vector<bool>& answered, int min_samples);

/// 1 - SSE/SST on the given rows, clamped to [0, 1]. Throws
/// DegenerateOutcome when n < 2 or b is constant.
double model_r2(std::span<const double> c, const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

struct SignificanceReport {
  int degrees_of_freedom = 0;
  std::vector<double> std_error;
  std::vector<double> t_stat;
  std::vector<double> p_value;
};

/// Classical OLS standard errors and two-sided Student-t p-values for every
/// entry of c (intercept first). Throws InsufficientDegreesOfFreedom when
/// n <= k + 1 and RankDeficient when [1 A] lacks full column rank.
SignificanceReport coeff_significance(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                      std::span<const double> c);

}  // namespace crowdsurvey
