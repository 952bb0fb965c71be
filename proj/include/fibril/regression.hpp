#pragma once

#include "fibril/surrogate.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fibril {

enum class RegressionVariant { linear_with_bias, polynomial_degree3, gaussian_rbf };

std::string_view to_string(RegressionVariant v);
RegressionVariant regression_variant_from_string(std::string_view name);

/// Linear-in-parameters regressor y = phi(u) . w + b over transformed inputs u.
///   linear_with_bias:   phi(u) = u
///   polynomial_degree3: phi(u) = [u, u^2, u^3] per coordinate, no cross terms
///   gaussian_rbf:       phi_j(u) = exp(-|u - center_j|^2 / (2 width^2))
struct RegressionModel {
  RegressionVariant variant = RegressionVariant::linear_with_bias;
  InputTransform transform;
  Eigen::VectorXd weights;
  double bias = 0.0;
  Eigen::MatrixXd centers;  // rbf only: rows in feature space
  double width = 0.0;
  double ridge = 0.0;
  std::vector<std::string> warnings;

  Eigen::Index parameter_count() const { return weights.size() + 1; }
};

/// Feature matrix phi for rows of transformed inputs.
Eigen::MatrixXd regression_features(const RegressionModel& model, const Eigen::MatrixXd& U);

/// Least squares with an unpenalized bias. ridge = 0 requires a full-rank
/// design matrix and throws otherwise.
RegressionModel fit_linear(const InputTransform& transform, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           double ridge = 0.0);
RegressionModel fit_polynomial3(const InputTransform& transform, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                double ridge = 1e-8);

struct RbfOptions {
  Eigen::Index n_centers = 100;
  double width = 1.0;
  double ridge = 1e-8;
  std::uint64_t seed = 0;  // center subset
};
/// Centers are a seeded random subset of the training rows. An
/// ill-conditioned Gram matrix escalates the ridge and records a warning.
RegressionModel fit_rbf(const InputTransform& transform, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const RbfOptions& options);

Eigen::VectorXd predict_batch(const RegressionModel& model, const Eigen::MatrixXd& X);
double predict(const RegressionModel& model, const Eigen::VectorXd& c);
Eigen::VectorXd input_gradient(const RegressionModel& model, const Eigen::VectorXd& c);

}  // namespace fibril
