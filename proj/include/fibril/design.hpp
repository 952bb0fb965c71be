#pragma once

#include "fibril/dataset.hpp"
#include "fibril/geometry.hpp"
#include "fibril/model.hpp"
#include "fibril/projection.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace fibril {

/// Designer settings. The predictor is frozen; the design vector is the
/// only free variable.
struct DesignProblem {
  double mean_c = 20.0 / 3.0;
  double c_lo = 2.0 / 3.0;
  double c_hi = 200.0 / 3.0;
  int n_starts = 100;
  int max_iters = 2000;
  double step_size = 10.0;  // initial eta of each backtracking search
  int max_halvings = 20;
  double tolerance = 1e-7;  // |Δŷ| over `window` accepted iterations
  int window = 5;
  bool enforce_mean = true;  // false: box constraint only
  SamplerConfig init;        // start distribution (bounds/mean overridden by the problem)
  std::uint64_t seed = 0;
  int threads = 1;
};

struct DesignResult {
  Eigen::VectorXd c_opt;
  double predicted_strength = 0.0;
  double verified_strength = 0.0;
  int start_id = 0;
  int iterations = 0;
  bool converged = false;

  double discrepancy() const { return predicted_strength - verified_strength; }
  /// Absolute prediction error band used for the held-out scatter.
  bool over_tolerance(double band = 0.03) const { return std::abs(discrepancy()) > band; }
};

/// Projected gradient ascent from one start with backtracking on η. The
/// result is not verified.
DesignResult ascend(const Surrogate& predictor, const Eigen::VectorXd& start, const DesignProblem& problem,
                    int start_id = 0);

/// Multi-start ascent, simulator verification and ranking (verified
/// strength desc, then predicted desc, then start id).
std::vector<DesignResult> optimize(const FibrilArray& layout, const Surrogate& predictor, const DesignProblem& problem);

double verify(const Eigen::VectorXd& c, const FibrilArray& layout, double beta_x = 0.0, double beta_y = 0.0);

void rank_results(std::vector<DesignResult>& results);

struct FeedbackOutcome {
  Dataset dataset;
  int appended = 0;
  std::vector<std::string> notices;
};

/// Appends the top-k ranked designs as feedback samples (training split).
/// Designs within 1e-9 of an existing sample are skipped with a notice.
FeedbackOutcome feedback(const Dataset& dataset, const std::vector<DesignResult>& ranked, int k);

struct ProfileRow {
  Eigen::Index fibril_id = 0;
  double r_over_R = 0.0;
  double C = 0.0;
  double C_normalized = 0.0;  // (C - C_min)/(C_max - C_min); NaN when undefined
};

struct ProfileReport {
  std::vector<ProfileRow> rows;
  bool normalized_defined = false;
  double inner_mean = 0.0;  // r/R < 0.2
  double outer_mean = 0.0;  // r/R > 0.8
  double inner_mean_normalized = 0.0;
  double outer_mean_normalized = 0.0;
  Eigen::Index n_inner = 0;
  Eigen::Index n_outer = 0;
  double spearman = 0.0;  // rank correlation between r/R and C

  bool softer_periphery() const { return n_inner > 0 && n_outer > 0 && outer_mean > inner_mean && spearman > 0.0; }
};

ProfileReport profile_report(const Eigen::VectorXd& c, const FibrilArray& layout);

/// Spearman correlation with average ranks for ties; NaN for constant input.
double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace fibril
