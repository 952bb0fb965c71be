#include "fibril/projection.hpp"

#include "fibril/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fibril {

namespace {

double clamped_mean(const Eigen::VectorXd& c, double mu, double lo, double hi) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) sum += std::clamp(c[i] + mu, lo, hi);
  return sum / static_cast<double>(c.size());
}

}  // namespace

Eigen::VectorXd project(const Eigen::VectorXd& c, double mean_c, double lo, double hi) {
  if (!(lo <= mean_c && mean_c <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    std::ostringstream msg;
    msg << "infeasible constraint set: mean " << mean_c << " outside bounds [" << lo << ", " << hi << "]";
    throw DomainError(msg.str());
  }
  if (c.size() == 0) throw DomainError("cannot project an empty design");
  if (!c.allFinite()) throw DomainError("cannot project a design with non-finite entries");

  const double tol = 1e-12 * std::max(1.0, std::abs(mean_c));
  if (c.minCoeff() >= lo && c.maxCoeff() <= hi && std::abs(c.mean() - mean_c) <= tol) return c;

  // mean(clamp(c + mu)) is continuous and non-decreasing in mu.
  double mu_lo = lo - c.maxCoeff();
  double mu_hi = hi - c.minCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (mu_lo + mu_hi);
    if (mid <= mu_lo || mid >= mu_hi) break;
    (clamped_mean(c, mid, lo, hi) < mean_c ? mu_lo : mu_hi) = mid;
  }

  // On the bracketed piece the mean is affine in mu: solve it directly.
  double mu = 0.5 * (mu_lo + mu_hi);
  double fixed_sum = 0.0, free_sum = 0.0;
  Eigen::Index n_free = 0;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const double v = c[i] + mu;
    if (v <= lo) {
      fixed_sum += lo;
    } else if (v >= hi) {
      fixed_sum += hi;
    } else {
      free_sum += c[i];
      ++n_free;
    }
  }
  if (n_free > 0) {
    const double exact = (static_cast<double>(c.size()) * mean_c - fixed_sum - free_sum) / static_cast<double>(n_free);
    if (std::abs(clamped_mean(c, exact, lo, hi) - mean_c) <= std::abs(clamped_mean(c, mu, lo, hi) - mean_c)) {
      mu = exact;
    }
  }
  Eigen::VectorXd out(c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) out[i] = std::clamp(c[i] + mu, lo, hi);
  return out;
}

Eigen::VectorXd clamp_to_box(const Eigen::VectorXd& c, double lo, double hi) {
  if (!(lo <= hi)) throw DomainError("empty box");
  return c.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace fibril
