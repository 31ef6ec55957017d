// SPDX-License-Identifier: Apache-2.0
#include "epsnet/linalg.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>

#include "epsnet/error.hpp"

namespace epsnet {

OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::string> names) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (y.size() != n) throw ShapeError("ols: response length differs from design rows");
  if (p == 0) throw ShapeError("ols: empty design");
  if (n < p) throw ShapeError("ols: fewer rows (" + std::to_string(n) + ") than columns (" + std::to_string(p) + ")");
  if (names.empty())
    for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
  if (static_cast<Eigen::Index>(names.size()) != p) throw ShapeError("ols: column name count differs from design");
  if (!X.allFinite() || !y.allFinite()) throw DataError("ols: non-finite input");

  // Scale columns so the rank threshold is relative to each column's own magnitude.
  Eigen::VectorXd scale = X.colwise().norm().transpose();
  std::vector<std::string> zero;
  for (Eigen::Index j = 0; j < p; ++j)
    if (scale(j) == 0.0) zero.push_back(names[static_cast<std::size_t>(j)]);
  if (!zero.empty()) throw RankError("ols: design is rank deficient", zero);
  const Eigen::MatrixXd Xs = X * scale.cwiseInverse().asDiagonal();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    std::vector<std::string> dependent;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < p; ++k) dependent.push_back(names[static_cast<std::size_t>(perm(k))]);
    std::sort(dependent.begin(), dependent.end());
    throw RankError("ols: design is rank deficient", dependent);
  }

  OlsFit fit;
  fit.names = std::move(names);
  fit.n = static_cast<std::size_t>(n);
  fit.coef = qr.solve(y).cwiseQuotient(scale);
  fit.residuals = y - X * fit.coef;
  fit.residual_variance = n > p ? fit.residuals.squaredNorm() / static_cast<double>(n - p)
                                : std::numeric_limits<double>::quiet_NaN();

  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::VectorXd d = R.diagonal().cwiseAbs();
  fit.condition = d.maxCoeff() / d.minCoeff();
  // (Xs'Xs)^-1 = P R^-1 R^-T P'; undo the column scaling afterwards.
  const Eigen::MatrixXd Rinv =
      R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd inner = Rinv * Rinv.transpose();
  Eigen::MatrixXd unpivoted(p, p);
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index a = 0; a < p; ++a)
    for (Eigen::Index b = 0; b < p; ++b) unpivoted(perm(a), perm(b)) = inner(a, b);
  const Eigen::VectorXd inv_scale = scale.cwiseInverse();
  fit.xtx_inverse = inv_scale.asDiagonal() * unpivoted * inv_scale.asDiagonal();
  return fit;
}

}  // namespace epsnet
