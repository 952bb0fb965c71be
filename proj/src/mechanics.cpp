#include "fibril/mechanics.hpp"

#include "json.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <ostream>

namespace fibril {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Candidates whose event separations (or loads) agree to this relative
// precision count as ties and are resolved by the lowest canonical index.
constexpr double kTieTol = 1e-12;

bool ties_with(double value, double best) {
  return std::abs(value - best) <= kTieTol * std::max(1.0, std::abs(best));
}

// Attached-set state. Rows [0, n) of the buffers are live; the stiffness is
// kept in the lower triangle only. Removing a fibril applies the rank-one
// Schur downdate and then moves the last live row into the freed slot.
class ActiveSet {
 public:
  ActiveSet(const FibrilArray& array, const VectorXd& design, double beta_x, double beta_y,
            const SimulationOptions& options)
      : options_(options), n_(array.size()) {
    C_ = compliance_matrix(array, design);
    tilt_.resize(n_);
    ids_.resize(static_cast<std::size_t>(n_));
    for (Index i = 0; i < n_; ++i) {
      tilt_[i] = beta_x * array.fibrils[i].x_hat + beta_y * array.fibrils[i].y_hat;
      ids_[static_cast<std::size_t>(i)] = i;
    }
    K_.resize(n_, n_);
    s_.resize(n_);
    t_.resize(n_);
    rebuild();
    rebuilds_ = 0;
  }

  Index size() const { return n_; }
  Index id(Index local) const { return ids_[static_cast<std::size_t>(local)]; }
  double slope(Index local) const { return s_[local]; }
  double offset(Index local) const { return t_[local]; }
  double load(Index local, double D) const { return s_[local] * D + t_[local]; }
  int rebuilds() const { return rebuilds_; }

  /// Sum of loads at separation D.
  double force_sum(double D) const {
    if (n_ == 0) return 0.0;
    return s_.head(n_).sum() * D + t_.head(n_).sum();
  }

  void remove(Index i) {
    const Index last = n_ - 1;
    bool downdated = false;
    if (options_.update == StiffnessUpdate::downdate && n_ > 1) {
      const double kii = K_(i, i);
      const double scale = K_.diagonal().head(n_).cwiseAbs().maxCoeff();
      if (kii > 1e-14 * scale) {
        VectorXd k(n_);
        for (Index j = 0; j < n_; ++j) k[j] = j >= i ? K_(j, i) : K_(i, j);
        K_.topLeftCorner(n_, n_).selfadjointView<Eigen::Lower>().rankUpdate(k, -1.0 / kii);
        const double si = s_[i];
        const double ti = t_[i];
        s_.head(n_) -= k * (si / kii);
        t_.head(n_) -= k * (ti / kii);
        downdated = true;
      }
    }
    move_last_into(i);
    n_ = last;
    ++removals_;
    if (n_ == 0) return;
    if (!downdated) {
      rebuild();
    } else if (options_.residual_check_interval > 0 && removals_ % options_.residual_check_interval == 0) {
      check_residual();
    }
  }

  MatrixXd stiffness_full() const {
    MatrixXd K = K_.topLeftCorner(n_, n_).selfadjointView<Eigen::Lower>();
    return K;
  }
  std::span<const Index> ids() const { return {ids_.data(), static_cast<std::size_t>(n_)}; }

 private:
  void move_last_into(Index i) {
    const Index last = n_ - 1;
    if (i != last) {
      for (Index j = 0; j < i; ++j) K_(i, j) = K_(last, j);
      for (Index j = i + 1; j < last; ++j) K_(j, i) = K_(last, j);
      K_(i, i) = K_(last, last);
      C_.row(i).head(n_) = C_.row(last).head(n_);
      C_.col(i).head(n_) = C_.col(last).head(n_);
      C_(i, i) = C_(last, last);
      s_[i] = s_[last];
      t_[i] = t_[last];
      tilt_[i] = tilt_[last];
      ids_[static_cast<std::size_t>(i)] = ids_[static_cast<std::size_t>(last)];
    }
  }

  void rebuild() {
    Eigen::LLT<MatrixXd> llt(C_.topLeftCorner(n_, n_));
    if (llt.info() != Eigen::Success) {
      throw DomainError("compliance matrix of the attached set is not positive definite");
    }
    K_.topLeftCorner(n_, n_) = llt.solve(MatrixXd::Identity(n_, n_));
    s_.head(n_) = K_.topLeftCorner(n_, n_).rowwise().sum();
    t_.head(n_) = K_.topLeftCorner(n_, n_) * tilt_.head(n_);
    ++rebuilds_;
  }

  void check_residual() {
    const VectorXd r = C_.topLeftCorner(n_, n_) * s_.head(n_) - VectorXd::Ones(n_);
    if (r.lpNorm<Eigen::Infinity>() > options_.residual_tol) rebuild();
  }

  const SimulationOptions& options_;
  Index n_;
  MatrixXd C_;
  MatrixXd K_;
  VectorXd s_;
  VectorXd t_;
  VectorXd tilt_;
  std::vector<Index> ids_;
  long removals_ = 0;
  int rebuilds_ = 0;
};

// Live index of the largest load >= 1 at separation D, or -1.
Index worst_violator(const ActiveSet& set, double D) {
  Index best = -1;
  double best_load = 0.0;
  for (Index j = 0; j < set.size(); ++j) {
    const double f = set.load(j, D);
    if (f < 1.0) continue;
    if (best < 0) {
      best = j;
      best_load = f;
    } else if (ties_with(f, best_load)) {
      if (set.id(j) < set.id(best)) best = j;
      best_load = std::max(best_load, f);
    } else if (f > best_load) {
      best = j;
      best_load = f;
    }
  }
  return best;
}

// `at_threshold` marks events located exactly where the fibril's load
// reaches 1; its load is then taken as exactly 1 instead of s*D + t.
void record(DetachmentTrace& trace, ActiveSet& set, Index local, double D, double n_original,
            const SimulationOptions& options, bool at_threshold = false) {
  DetachmentEvent ev;
  ev.D_event = D;
  const double sum = set.force_sum(D);
  ev.force_before = (at_threshold ? sum - set.load(local, D) + 1.0 : sum) / n_original;
  ev.detached_id = set.id(local);
  set.remove(local);
  ev.force_after = set.force_sum(D) / n_original;
  trace.strength = std::max(trace.strength, ev.force_before);
  trace.events.push_back(ev);
  if (options.observer && set.size() > 0) options.observer(set.stiffness_full(), set.ids());
}

[[noreturn]] void throw_non_detaching(Index remaining) {
  std::ostringstream msg;
  msg << "non-detaching configuration: " << remaining << " attached fibrils can never reach the critical load";
  throw DomainError(msg.str());
}

DetachmentTrace make_trace(const FibrilArray& array, double beta_x, double beta_y) {
  DetachmentTrace trace;
  trace.n_fibrils = array.size();
  trace.beta_x = beta_x;
  trace.beta_y = beta_y;
  trace.events.reserve(static_cast<std::size_t>(array.size()));
  return trace;
}

}  // namespace

std::vector<Index> DetachmentTrace::detachment_order() const {
  std::vector<Index> order;
  order.reserve(events.size());
  for (const auto& e : events) order.push_back(e.detached_id);
  return order;
}

std::vector<std::pair<double, double>> DetachmentTrace::polyline() const {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(2 * events.size() + 1);
  pts.emplace_back(0.0, initial_force);
  for (const auto& e : events) {
    pts.emplace_back(e.D_event, e.force_before);
    pts.emplace_back(e.D_event, e.force_after);
  }
  return pts;
}

DetachmentTrace simulate_detachment(const FibrilArray& array, const VectorXd& design, double beta_x, double beta_y,
                                    const SimulationOptions& options) {
  validate(array);
  ActiveSet set(array, design, beta_x, beta_y, options);
  DetachmentTrace trace = make_trace(array, beta_x, beta_y);
  const double n_original = static_cast<double>(array.size());
  trace.initial_force = set.force_sum(0.0) / n_original;

  double D = 0.0;
  while (set.size() > 0) {
    const Index violator = worst_violator(set, D);
    if (violator >= 0) {
      record(trace, set, violator, D, n_original, options);
      continue;
    }
    Index next = -1;
    double next_D = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < set.size(); ++j) {
      const double s = set.slope(j);
      if (!(s > 0.0)) continue;
      const double Dj = (1.0 - set.offset(j)) / s;
      if (next < 0 || (Dj < next_D && !ties_with(Dj, next_D))) {
        next = j;
        next_D = Dj;
      } else if (ties_with(Dj, next_D) && set.id(j) < set.id(next)) {
        next = j;
        next_D = std::min(next_D, Dj);
      }
    }
    if (next < 0) throw_non_detaching(set.size());
    const bool exact = next_D >= D;
    D = std::max(D, next_D);
    record(trace, set, next, D, n_original, options, exact);
  }
  trace.rebuilds = set.rebuilds();
  return trace;
}

DetachmentTrace stepped_simulate(const FibrilArray& array, const VectorXd& design, double beta_x, double beta_y,
                                 double delta_D, const SimulationOptions& options) {
  if (!(delta_D > 0.0) || !std::isfinite(delta_D)) throw DomainError("delta_D must be positive");
  validate(array);
  ActiveSet set(array, design, beta_x, beta_y, options);
  DetachmentTrace trace = make_trace(array, beta_x, beta_y);
  const double n_original = static_cast<double>(array.size());
  trace.initial_force = set.force_sum(0.0) / n_original;

  for (long step = 0; set.size() > 0; ++step) {
    const double D = static_cast<double>(step) * delta_D;
    bool any = false;
    for (Index v = worst_violator(set, D); v >= 0; v = worst_violator(set, D)) {
      record(trace, set, v, D, n_original, options);
      any = true;
    }
    if (!any && set.size() > 0) {
      bool rising = false;
      for (Index j = 0; j < set.size() && !rising; ++j) rising = set.slope(j) > 0.0;
      if (!rising) throw_non_detaching(set.size());
    }
  }
  trace.rebuilds = set.rebuilds();
  return trace;
}

double adhesive_strength(const FibrilArray& array, const VectorXd& design) {
  return simulate_detachment(array, design).strength;
}

void write_trace_csv(std::ostream& out, const DetachmentTrace& trace) {
  out << "event_index,D_event,force_before,detached_id\n" << std::setprecision(17);
  for (std::size_t k = 0; k < trace.events.size(); ++k) {
    const auto& e = trace.events[k];
    out << k << ',' << e.D_event << ',' << e.force_before << ',' << e.detached_id << '\n';
  }
}

void write_polyline_csv(std::ostream& out, const DetachmentTrace& trace) {
  out << "D,force\n" << std::setprecision(17);
  for (const auto& [D, F] : trace.polyline()) out << D << ',' << F << '\n';
}

std::string trace_summary_json(const DetachmentTrace& trace) {
  nlohmann::ordered_json j;
  j["n_fibrils"] = trace.n_fibrils;
  j["strength"] = trace.strength;
  j["beta_x"] = trace.beta_x;
  j["beta_y"] = trace.beta_y;
  return j.dump(2);
}

}  // namespace fibril
