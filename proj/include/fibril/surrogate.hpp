#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace fibril {

/// Feature map shared by every predictor: z = (c - center) / scale, then
/// (optionally) coordinates in an orthonormal basis of the training inputs'
/// principal subspace. Designs only vary along that subspace, and restricting
/// the models to it keeps their gradients from pointing off the sampled
/// manifold.
struct InputTransform {
  double center = 0.0;
  double scale = 1.0;
  Eigen::Index input_width = 0;
  Eigen::MatrixXd basis;  // input_width x k, orthonormal columns; empty = identity

  Eigen::Index feature_width() const { return basis.size() == 0 ? input_width : basis.cols(); }
  bool projected() const { return basis.size() != 0; }

  /// Rows of X are designs; returns rows of features.
  template <typename Derived>
  Eigen::MatrixXd apply(const Eigen::MatrixBase<Derived>& X) const {
    Eigen::MatrixXd Z = (X.array() - center) / scale;
    if (!projected()) return Z;
    return Z * basis;
  }

  /// Chain rule back to design space: d/dc = basis * d/du / scale.
  template <typename Derived>
  Eigen::VectorXd pullback(const Eigen::MatrixBase<Derived>& grad_features) const {
    if (!projected()) return grad_features / scale;
    return basis * grad_features / scale;
  }
};

/// Standardization only.
InputTransform standardize(double mean_c, Eigen::Index width);

/// Standardization followed by projection onto the span of the training rows
/// (singular values above rank_tol * sigma_max). Falls back to plain
/// standardization when the training inputs are full rank.
InputTransform fit_transform(const Eigen::MatrixXd& X, double mean_c, double rank_tol = 1e-8);

struct Metrics {
  double mse = 0.0;
  double r2 = std::numeric_limits<double>::quiet_NaN();
  bool r2_defined = false;  // false when the labels have zero variance
};

template <typename A, typename B>
Metrics metrics(const Eigen::MatrixBase<A>& y_true, const Eigen::MatrixBase<B>& y_pred) {
  Metrics m;
  const auto n = y_true.size();
  if (n == 0 || y_pred.size() != n) return m;
  m.mse = (y_true - y_pred).squaredNorm() / static_cast<double>(n);
  const double ss_tot = (y_true.array() - y_true.mean()).square().sum();
  if (n >= 2 && ss_tot > 0.0) {
    m.r2 = 1.0 - m.mse * static_cast<double>(n) / ss_tot;
    m.r2_defined = true;
  }
  return m;
}

}  // namespace fibril
