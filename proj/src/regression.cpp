#include "fibril/regression.hpp"

#include "fibril/error.hpp"
#include "fibril/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <sstream>

namespace fibril {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(RegressionVariant v) {
  switch (v) {
    case RegressionVariant::linear_with_bias: return "linear_with_bias";
    case RegressionVariant::polynomial_degree3: return "polynomial_degree3";
    case RegressionVariant::gaussian_rbf: return "gaussian_rbf";
  }
  return "?";
}

RegressionVariant regression_variant_from_string(std::string_view name) {
  if (name == "linear_with_bias") return RegressionVariant::linear_with_bias;
  if (name == "polynomial_degree3") return RegressionVariant::polynomial_degree3;
  if (name == "gaussian_rbf") return RegressionVariant::gaussian_rbf;
  throw DomainError("unknown regression variant '" + std::string(name) + "'");
}

MatrixXd regression_features(const RegressionModel& model, const MatrixXd& U) {
  switch (model.variant) {
    case RegressionVariant::linear_with_bias:
      return U;
    case RegressionVariant::polynomial_degree3: {
      const Index k = U.cols();
      MatrixXd P(U.rows(), 3 * k);
      P.leftCols(k) = U;
      P.middleCols(k, k) = U.array().square().matrix();
      P.rightCols(k) = U.array().cube().matrix();
      return P;
    }
    case RegressionVariant::gaussian_rbf: {
      MatrixXd P(U.rows(), model.centers.rows());
      const double inv = 1.0 / (2.0 * model.width * model.width);
      for (Index j = 0; j < model.centers.rows(); ++j)
        P.col(j) = (-(U.rowwise() - model.centers.row(j)).rowwise().squaredNorm() * inv).array().exp().matrix();
      return P;
    }
  }
  throw DomainError("unknown regression variant");
}

namespace {

void check_training_set(const InputTransform& transform, const MatrixXd& X, const VectorXd& y) {
  if (X.rows() != y.size()) throw DomainError("design and label counts differ");
  if (X.rows() == 0) throw DomainError("empty training set");
  if (X.cols() != transform.input_width) {
    std::ostringstream msg;
    msg << "training designs have width " << X.cols() << ", transform expects " << transform.input_width;
    throw DomainError(msg.str());
  }
}

// Centered least squares: the bias absorbs the means and is never penalized.
void solve_affine(RegressionModel& model, const MatrixXd& Phi, const VectorXd& y) {
  const Eigen::RowVectorXd mu = Phi.colwise().mean();
  const MatrixXd A = Phi.rowwise() - mu;
  const double y_mean = y.mean();
  const VectorXd yc = y.array() - y_mean;
  if (model.ridge == 0.0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
    if (qr.rank() < A.cols()) {
      std::ostringstream msg;
      msg << "rank-deficient least squares (rank " << qr.rank() << " of " << A.cols() << " features with "
          << A.rows() << " samples); set a positive ridge term";
      throw DomainError(msg.str());
    }
    model.weights = qr.solve(yc);
  } else {
    MatrixXd G = A.transpose() * A;
    const VectorXd rhs = A.transpose() * yc;
    double ridge = model.ridge;
    for (int attempt = 0;; ++attempt) {
      MatrixXd H = G;
      H.diagonal().array() += ridge;
      Eigen::LLT<MatrixXd> llt(H);
      const bool ok = llt.info() == Eigen::Success && llt.rcond() > 1e-13;
      if (ok || attempt == 12) {
        if (llt.info() != Eigen::Success) throw DomainError("regularized normal equations are not positive definite");
        if (ridge != model.ridge) {
          std::ostringstream msg;
          msg << "ill-conditioned Gram matrix: ridge raised from " << model.ridge << " to " << ridge;
          model.warnings.push_back(msg.str());
          model.ridge = ridge;
        }
        model.weights = llt.solve(rhs);
        break;
      }
      ridge = ridge > 0.0 ? ridge * 100.0 : 1e-10;
    }
  }
  model.bias = y_mean - mu.dot(model.weights);
  if (!model.weights.allFinite() || !std::isfinite(model.bias)) throw DomainError("regression produced non-finite weights");
}

}  // namespace

RegressionModel fit_linear(const InputTransform& transform, const MatrixXd& X, const VectorXd& y, double ridge) {
  check_training_set(transform, X, y);
  RegressionModel m;
  m.variant = RegressionVariant::linear_with_bias;
  m.transform = transform;
  m.ridge = ridge;
  solve_affine(m, regression_features(m, transform.apply(X)), y);
  return m;
}

RegressionModel fit_polynomial3(const InputTransform& transform, const MatrixXd& X, const VectorXd& y, double ridge) {
  check_training_set(transform, X, y);
  RegressionModel m;
  m.variant = RegressionVariant::polynomial_degree3;
  m.transform = transform;
  m.ridge = ridge;
  solve_affine(m, regression_features(m, transform.apply(X)), y);
  return m;
}

RegressionModel fit_rbf(const InputTransform& transform, const MatrixXd& X, const VectorXd& y,
                        const RbfOptions& options) {
  check_training_set(transform, X, y);
  if (!(options.width > 0.0)) throw DomainError("RBF width must be positive");
  if (options.n_centers < 1) throw DomainError("RBF needs at least one center");
  RegressionModel m;
  m.variant = RegressionVariant::gaussian_rbf;
  m.transform = transform;
  m.width = options.width;
  m.ridge = options.ridge;
  const MatrixXd U = transform.apply(X);
  const Index n_centers = std::min<Index>(options.n_centers, U.rows());
  Rng rng(options.seed);
  const auto perm = rng.permutation(static_cast<std::size_t>(U.rows()));
  m.centers.resize(n_centers, U.cols());
  for (Index j = 0; j < n_centers; ++j) m.centers.row(j) = U.row(static_cast<Index>(perm[static_cast<std::size_t>(j)]));
  solve_affine(m, regression_features(m, U), y);
  return m;
}

VectorXd predict_batch(const RegressionModel& model, const MatrixXd& X) {
  if (X.cols() != model.transform.input_width) throw DomainError("design width does not match the model");
  return (regression_features(model, model.transform.apply(X)) * model.weights).array() + model.bias;
}

double predict(const RegressionModel& model, const VectorXd& c) {
  return predict_batch(model, c.transpose())[0];
}

VectorXd input_gradient(const RegressionModel& model, const VectorXd& c) {
  if (c.size() != model.transform.input_width) throw DomainError("design width does not match the model");
  const VectorXd u = model.transform.apply(c.transpose()).row(0).transpose();
  const Index k = u.size();
  VectorXd g(k);
  switch (model.variant) {
    case RegressionVariant::linear_with_bias:
      g = model.weights;
      break;
    case RegressionVariant::polynomial_degree3:
      g = model.weights.head(k).array() + 2.0 * model.weights.segment(k, k).array() * u.array() +
          3.0 * model.weights.tail(k).array() * u.array().square();
      break;
    case RegressionVariant::gaussian_rbf: {
      g.setZero();
      const double inv = 1.0 / (model.width * model.width);
      for (Index j = 0; j < model.centers.rows(); ++j) {
        const VectorXd d = u - model.centers.row(j).transpose();
        const double phi = std::exp(-0.5 * d.squaredNorm() * inv);
        g -= model.weights[j] * phi * inv * d;
      }
      break;
    }
  }
  return model.transform.pullback(g);
}

}  // namespace fibril
