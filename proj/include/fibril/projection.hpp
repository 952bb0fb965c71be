#pragma once

#include <Eigen/Dense>

namespace fibril {

/// Euclidean projection onto {mean(c) = mean_c} ∩ [lo, hi]^N. The result has
/// the form clamp(c + mu); mu is bracketed by bisection and then solved
/// exactly on the final active set. Feasible inputs are returned unchanged.
Eigen::VectorXd project(const Eigen::VectorXd& c, double mean_c, double lo, double hi);

/// Box-only variant used when the fixed-mean constraint is switched off.
Eigen::VectorXd clamp_to_box(const Eigen::VectorXd& c, double lo, double hi);

}  // namespace fibril
