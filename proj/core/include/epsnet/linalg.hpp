// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace epsnet {

struct OlsFit {
  Eigen::VectorXd coef;
  std::vector<std::string> names;
  Eigen::VectorXd residuals;
  /// Sum of squared residuals / (n - p); NaN when n == p.
  double residual_variance = 0.0;
  std::size_t n = 0;
  /// Ratio of largest to smallest |diag(R)| of the pivoted QR factor.
  double condition = 0.0;
  /// (X'X)^-1, from the QR factor.
  Eigen::MatrixXd xtx_inverse;
};

/// Least squares via column-pivoted Householder QR. Throws RankError listing the columns that
/// are linearly dependent on the others and ShapeError on mismatched or underdetermined input.
/// `names` may be empty, in which case columns are called x0, x1, ...
OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::string> names = {});

}  // namespace epsnet
