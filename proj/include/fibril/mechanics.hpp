#pragma once

#include "fibril/error.hpp"
#include "fibril/geometry.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <iosfwd>
#include <numbers>
#include <span>
#include <sstream>
#include <vector>

namespace fibril {

/// Self term of the backing-layer compliance for a fibril of unit radius.
inline constexpr double kSelfCompliance = 16.0 / (3.0 * std::numbers::pi);

/// Dimensionless compliance matrix C and its inverse K for the attached set.
template <typename Scalar>
struct ComplianceSystem {
  Eigen::MatrixX<Scalar> C;        // full N x N
  Eigen::MatrixX<Scalar> K;        // inverse of C restricted to attached fibrils
  std::vector<bool> attached;      // mask over canonical fibril indices

  Eigen::Index size() const { return C.rows(); }
  std::vector<Eigen::Index> attached_indices() const {
    std::vector<Eigen::Index> ids;
    for (std::size_t i = 0; i < attached.size(); ++i)
      if (attached[i]) ids.push_back(static_cast<Eigen::Index>(i));
    return ids;
  }
};

/// Rigid-surface kinematics: d_j/d0 = D + beta_x x_j + beta_y y_j.
struct LoadCase {
  double D = 0.0;
  double beta_x = 0.0;
  double beta_y = 0.0;
};

/// C_ij = 1/r_ij off the diagonal, C_ii = 16/(3 pi a_i) + c_i.
template <typename Derived>
Eigen::MatrixX<typename Derived::Scalar> compliance_matrix(const FibrilArray& array,
                                                          const Eigen::MatrixBase<Derived>& design) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = array.size();
  if (design.size() != n) {
    std::ostringstream msg;
    msg << "design has " << design.size() << " entries for " << n << " fibrils";
    throw DomainError(msg.str());
  }
  Eigen::MatrixX<Scalar> C(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& fj = array.fibrils[j];
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const auto& fi = array.fibrils[i];
      const Scalar r = Scalar(std::hypot(fi.x_hat - fj.x_hat, fi.y_hat - fj.y_hat));
      C(i, j) = C(j, i) = Scalar(1) / r;
    }
    const Scalar cj = design(j);
    if (!(cj > Scalar(0)) || !std::isfinite(static_cast<double>(cj))) {
      std::ostringstream msg;
      msg << "design entry " << j << " must be positive and finite (got " << cj << ")";
      throw DomainError(msg.str());
    }
    C(j, j) = Scalar(kSelfCompliance) / Scalar(fj.radius_ratio) + cj;
  }
  return C;
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
template <typename Derived>
Eigen::MatrixX<typename Derived::Scalar> spd_inverse(const Eigen::MatrixBase<Derived>& C) {
  using Scalar = typename Derived::Scalar;
  Eigen::LLT<Eigen::MatrixX<Scalar>> llt(C);
  if (llt.info() != Eigen::Success) {
    throw DomainError("compliance matrix is not positive definite");
  }
  return llt.solve(Eigen::MatrixX<Scalar>::Identity(C.rows(), C.cols()));
}

template <typename Derived>
ComplianceSystem<typename Derived::Scalar> assemble(const FibrilArray& array,
                                                   const Eigen::MatrixBase<Derived>& design) {
  validate(array);
  ComplianceSystem<typename Derived::Scalar> sys;
  sys.C = compliance_matrix(array, design);
  try {
    sys.K = spd_inverse(sys.C);
  } catch (const DomainError&) {
    std::ostringstream msg;
    msg << "compliance matrix of the " << to_string(array.layout_kind) << " layout with N = " << array.size()
        << " is not positive definite (min diagonal " << sys.C.diagonal().minCoeff() << ")";
    throw DomainError(msg.str());
  }
  sys.attached.assign(static_cast<std::size_t>(array.size()), true);
  return sys;
}

/// Prescribed tip deflections d_j/d0 over the listed fibrils.
template <typename Scalar = double>
Eigen::VectorX<Scalar> tip_deflections(const FibrilArray& array, std::span<const Eigen::Index> ids,
                                       const LoadCase& load) {
  Eigen::VectorX<Scalar> d(static_cast<Eigen::Index>(ids.size()));
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto& f = array.fibrils[ids[k]];
    d[static_cast<Eigen::Index>(k)] = Scalar(load.D + load.beta_x * f.x_hat + load.beta_y * f.y_hat);
  }
  return d;
}

/// f_i/f_c = K d over attached fibrils (attached index order). Compressive
/// loads are returned as negative values.
template <typename Scalar>
Eigen::VectorX<Scalar> fibril_loads(const ComplianceSystem<Scalar>& sys, const FibrilArray& array,
                                    const LoadCase& load) {
  const auto ids = sys.attached_indices();
  if (static_cast<Eigen::Index>(ids.size()) != sys.K.rows()) {
    throw DomainError("stiffness matrix does not match the attached set");
  }
  return sys.K * tip_deflections<Scalar>(array, ids, load);
}

/// F/(N f_c) with N the original fibril count.
template <typename Derived>
typename Derived::Scalar total_force(const Eigen::MatrixBase<Derived>& loads, Eigen::Index n_original) {
  if (n_original <= 0 || loads.size() == 0) return typename Derived::Scalar(0);
  return loads.sum() / typename Derived::Scalar(n_original);
}

/// Stiffness of the attached set with local fibril `i` removed:
/// K' = K_sub - k k^T / K_ii (Schur complement), remaining order preserved.
/// Throws DomainError when |K_ii| is too small for a stable downdate.
template <typename Derived>
Eigen::MatrixX<typename Derived::Scalar> downdate_stiffness(const Eigen::MatrixBase<Derived>& K, Eigen::Index i,
                                                           double pivot_tol = 1e-14) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = K.rows();
  if (i < 0 || i >= n) throw DomainError("downdate index out of range");
  const Scalar kii = K(i, i);
  if (!(std::abs(static_cast<double>(kii)) > pivot_tol * static_cast<double>(K.diagonal().cwiseAbs().maxCoeff()))) {
    throw DomainError("downdate pivot below tolerance");
  }
  Eigen::MatrixX<Scalar> full = K - (K.col(i) / kii) * K.row(i);
  Eigen::MatrixX<Scalar> out(n - 1, n - 1);
  const Eigen::Index tail = n - 1 - i;
  out.topLeftCorner(i, i) = full.topLeftCorner(i, i);
  out.topRightCorner(i, tail) = full.topRightCorner(i, tail);
  out.bottomLeftCorner(tail, i) = full.bottomLeftCorner(tail, i);
  out.bottomRightCorner(tail, tail) = full.bottomRightCorner(tail, tail);
  return out;
}

/// Same as remove-row/column of C followed by a fresh inverse; used as the
/// fallback and as the reference path.
template <typename Derived>
Eigen::MatrixX<typename Derived::Scalar> delete_index(const Eigen::MatrixBase<Derived>& M, Eigen::Index i) {
  const Eigen::Index n = M.rows();
  const Eigen::Index tail = n - 1 - i;
  Eigen::MatrixX<typename Derived::Scalar> out(n - 1, n - 1);
  out.topLeftCorner(i, i) = M.topLeftCorner(i, i);
  out.topRightCorner(i, tail) = M.topRightCorner(i, tail);
  out.bottomLeftCorner(tail, i) = M.bottomLeftCorner(tail, i);
  out.bottomRightCorner(tail, tail) = M.bottomRightCorner(tail, tail);
  return out;
}

struct DetachmentEvent {
  double D_event = 0.0;
  double force_before = 0.0;  // F/(N f_c) just before the fibril lets go
  double force_after = 0.0;   // F/(N f_c) right after, same D
  Eigen::Index detached_id = -1;
};

struct DetachmentTrace {
  std::vector<DetachmentEvent> events;
  double strength = 0.0;
  Eigen::Index n_fibrils = 0;
  double beta_x = 0.0;
  double beta_y = 0.0;
  double initial_force = 0.0;  // F/(N f_c) at D = 0 (nonzero only under tilt)
  /// Number of stiffness rebuilds triggered by the residual monitor.
  int rebuilds = 0;

  std::vector<Eigen::Index> detachment_order() const;
  /// Force-deflection polyline vertices (D, F/(N f_c)) including the vertical
  /// drops at each event.
  std::vector<std::pair<double, double>> polyline() const;
};

enum class StiffnessUpdate {
  downdate,  // O(n^2) Schur complement per event, periodic residual check
  reinvert,  // fresh Cholesky inverse after every event (reference path)
};

struct SimulationOptions {
  StiffnessUpdate update = StiffnessUpdate::downdate;
  /// Events between residual checks ||C s - 1||_inf of the downdated state.
  int residual_check_interval = 8;
  double residual_tol = 1e-6;
  /// Called after every event with the attached-set stiffness (full
  /// symmetric storage) and the canonical ids of its rows.
  std::function<void(const Eigen::MatrixXd& K, std::span<const Eigen::Index> ids)> observer;
};

/// Exact event-driven detachment under displacement control.
DetachmentTrace simulate_detachment(const FibrilArray& array, const Eigen::VectorXd& design, double beta_x = 0.0,
                                    double beta_y = 0.0, const SimulationOptions& options = {});

/// Fixed-increment variant D_k = k dD; converges to simulate_detachment as dD -> 0.
DetachmentTrace stepped_simulate(const FibrilArray& array, const Eigen::VectorXd& design, double beta_x,
                                 double beta_y, double delta_D, const SimulationOptions& options = {});

/// Strength of a design with perfect alignment.
double adhesive_strength(const FibrilArray& array, const Eigen::VectorXd& design);

// event_index,D_event,force_before,detached_id
void write_trace_csv(std::ostream& out, const DetachmentTrace& trace);
void write_polyline_csv(std::ostream& out, const DetachmentTrace& trace);
std::string trace_summary_json(const DetachmentTrace& trace);

}  // namespace fibril
