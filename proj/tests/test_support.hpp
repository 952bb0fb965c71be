#pragma once

#include "fibril/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace fibril::testing {

/// Random non-overlapping custom array: n fibrils in a box with minimum
/// center distance `min_gap`, unit radii.
inline FibrilArray random_array(std::mt19937_64& rng, int n, double min_gap = 2.5) {
  FibrilArray a;
  a.layout_kind = LayoutKind::custom;
  const double box = 3.0 * std::sqrt(static_cast<double>(n)) + 3.0;
  std::uniform_real_distribution<double> pos(-box / 2, box / 2);
  while (static_cast<int>(a.fibrils.size()) < n) {
    const double x = pos(rng), y = pos(rng);
    bool ok = true;
    for (const auto& f : a.fibrils) ok = ok && std::hypot(f.x_hat - x, f.y_hat - y) >= min_gap;
    if (ok) a.fibrils.push_back({x, y, 1.0, 5.0, 0.75});
  }
  return a;
}

inline Eigen::VectorXd random_design(std::mt19937_64& rng, Eigen::Index n, double lo = 1.0, double hi = 20.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd c(n);
  for (Eigen::Index i = 0; i < n; ++i) c[i] = u(rng);
  return c;
}

}  // namespace fibril::testing
