#include "fibril/design.hpp"

#include "fibril/error.hpp"
#include "fibril/mechanics.hpp"
#include "fibril/parallel.hpp"
#include "fibril/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace fibril {

using Eigen::Index;
using Eigen::VectorXd;

namespace {

void check_problem(const DesignProblem& p) {
  if (!(p.c_lo < p.mean_c && p.mean_c < p.c_hi)) {
    std::ostringstream msg;
    msg << "design problem needs c_lo < mean_c < c_hi (got " << p.c_lo << ", " << p.mean_c << ", " << p.c_hi << ")";
    throw DomainError(msg.str());
  }
  if (p.n_starts < 1) throw DomainError("n_starts must be at least 1");
  if (p.max_iters < 0 || p.window < 1 || p.max_halvings < 0) throw DomainError("invalid iteration limits");
  if (!(p.step_size > 0.0)) throw DomainError("step_size must be positive");
}

VectorXd feasible(const VectorXd& c, const DesignProblem& p) {
  return p.enforce_mean ? project(c, p.mean_c, p.c_lo, p.c_hi) : clamp_to_box(c, p.c_lo, p.c_hi);
}

}  // namespace

DesignResult ascend(const Surrogate& predictor, const VectorXd& start, const DesignProblem& problem, int start_id) {
  check_problem(problem);
  require_input_width(predictor, start.size());
  DesignResult r;
  r.start_id = start_id;
  VectorXd c = feasible(start, problem);
  double y = predict(predictor, c);
  std::vector<double> history{y};
  for (int it = 0; it < problem.max_iters && std::isfinite(y); ++it) {
    const VectorXd g = input_gradient(predictor, c);
    if (!g.allFinite()) {
      y = std::numeric_limits<double>::quiet_NaN();
      break;
    }
    double eta = problem.step_size;
    bool accepted = false;
    VectorXd trial;
    double y_trial = y;
    for (int h = 0; h <= problem.max_halvings; ++h, eta *= 0.5) {
      trial = feasible(c + eta * g, problem);
      y_trial = predict(predictor, trial);
      if (y_trial >= y) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No ascent step survives backtracking: a constrained stationary point.
      r.converged = true;
      break;
    }
    c = std::move(trial);
    y = y_trial;
    r.iterations = it + 1;
    history.push_back(y);
    const auto w = static_cast<std::size_t>(problem.window);
    if (history.size() > w && std::abs(history.back() - history[history.size() - 1 - w]) < problem.tolerance) {
      r.converged = true;
      break;
    }
  }
  r.c_opt = std::move(c);
  r.predicted_strength = y;
  return r;
}

double verify(const VectorXd& c, const FibrilArray& layout, double beta_x, double beta_y) {
  return simulate_detachment(layout, c, beta_x, beta_y).strength;
}

void rank_results(std::vector<DesignResult>& results) {
  std::sort(results.begin(), results.end(), [](const DesignResult& a, const DesignResult& b) {
    if (a.verified_strength != b.verified_strength) return a.verified_strength > b.verified_strength;
    if (a.predicted_strength != b.predicted_strength) return a.predicted_strength > b.predicted_strength;
    return a.start_id < b.start_id;
  });
}

std::vector<DesignResult> optimize(const FibrilArray& layout, const Surrogate& predictor, const DesignProblem& problem) {
  check_problem(problem);
  validate(layout);
  require_input_width(predictor, layout.size());
  SamplerConfig sampler = problem.init;
  sampler.mean_c = problem.mean_c;
  sampler.c_lo = problem.c_lo;
  sampler.c_hi = problem.c_hi;

  std::vector<DesignResult> all(static_cast<std::size_t>(problem.n_starts));
  std::vector<char> ok(all.size(), 0);
  parallel_for(all.size(), problem.threads, [&](std::size_t s) {
    Rng rng(derive_seed(problem.seed, Stage::design, s));
    const VectorXd start = sample_design(layout, sampler, rng);
    DesignResult r = ascend(predictor, start, problem, static_cast<int>(s));
    if (std::isfinite(r.predicted_strength) && r.c_opt.allFinite()) {
      r.verified_strength = verify(r.c_opt, layout);
      ok[s] = 1;
    }
    all[s] = std::move(r);
  });
  std::vector<DesignResult> results;
  for (std::size_t s = 0; s < all.size(); ++s)
    if (ok[s]) results.push_back(std::move(all[s]));
  if (results.empty()) {
    std::ostringstream msg;
    msg << "all " << problem.n_starts << " designer starts diverged (non-finite prediction or gradient); "
        << "check the model file or lower step_size (" << problem.step_size << ")";
    throw DomainError(msg.str());
  }
  rank_results(results);
  return results;
}

FeedbackOutcome feedback(const Dataset& dataset, const std::vector<DesignResult>& ranked, int k) {
  FeedbackOutcome out{dataset, 0, {}};
  if (k < 0) throw DomainError("feedback k must be non-negative");
  const bool tagged = dataset.split.size() == dataset.samples.size();
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
  for (std::size_t r = 0; r < take; ++r) {
    const auto& res = ranked[r];
    if (res.c_opt.size() != dataset.width()) throw DomainError("feedback design width does not match the dataset");
    bool duplicate = false;
    for (const auto& s : out.dataset.samples) {
      if ((s.c - res.c_opt).norm() < 1e-9) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) {
      out.notices.push_back("skipped duplicate design from start " + std::to_string(res.start_id));
      continue;
    }
    out.dataset.samples.push_back({res.c_opt, res.verified_strength, true});
    if (tagged) out.dataset.split.push_back(SplitTag::train);
    ++out.appended;
  }
  return out;
}

double spearman(const VectorXd& a, const VectorXd& b) {
  const Index n = a.size();
  auto ranks = [n](const VectorXd& v) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return v[i] < v[j]; });
    VectorXd r(n);
    for (Index i = 0; i < n;) {
      Index j = i;
      while (j + 1 < n && v[order[static_cast<std::size_t>(j + 1)]] == v[order[static_cast<std::size_t>(i)]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j);
      for (Index k = i; k <= j; ++k) r[order[static_cast<std::size_t>(k)]] = avg;
      i = j + 1;
    }
    return r;
  };
  if (n < 2 || b.size() != n) return std::numeric_limits<double>::quiet_NaN();
  const VectorXd ra = ranks(a).array() - (n - 1) / 2.0;
  const VectorXd rb = ranks(b).array() - (n - 1) / 2.0;
  const double den = ra.norm() * rb.norm();
  return den > 0.0 ? ra.dot(rb) / den : std::numeric_limits<double>::quiet_NaN();
}

ProfileReport profile_report(const VectorXd& c, const FibrilArray& layout) {
  if (c.size() != layout.size()) throw DomainError("design width does not match the layout");
  ProfileReport rep;
  const double R = layout.characteristic_radius();
  const double c_min = c.minCoeff();
  const double c_max = c.maxCoeff();
  rep.normalized_defined = c_max - c_min > 1e-12 * std::max(1.0, std::abs(c_max));
  VectorXd r(c.size());
  double in = 0, out = 0, in_n = 0, out_n = 0;
  for (Index i = 0; i < c.size(); ++i) {
    const auto& f = layout.fibrils[i];
    ProfileRow row;
    row.fibril_id = i;
    row.r_over_R = R > 0.0 ? std::hypot(f.x_hat, f.y_hat) / R : 0.0;
    row.C = c[i];
    row.C_normalized = rep.normalized_defined ? (c[i] - c_min) / (c_max - c_min) : std::numeric_limits<double>::quiet_NaN();
    r[i] = row.r_over_R;
    if (row.r_over_R < 0.2) {
      ++rep.n_inner;
      in += row.C;
      in_n += row.C_normalized;
    } else if (row.r_over_R > 0.8) {
      ++rep.n_outer;
      out += row.C;
      out_n += row.C_normalized;
    }
    rep.rows.push_back(row);
  }
  if (rep.n_inner > 0) {
    rep.inner_mean = in / static_cast<double>(rep.n_inner);
    rep.inner_mean_normalized = in_n / static_cast<double>(rep.n_inner);
  }
  if (rep.n_outer > 0) {
    rep.outer_mean = out / static_cast<double>(rep.n_outer);
    rep.outer_mean_normalized = out_n / static_cast<double>(rep.n_outer);
  }
  rep.spearman = spearman(r, c);
  return rep;
}

}  // namespace fibril
