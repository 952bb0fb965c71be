#include "fibril/mlp.hpp"

#include "fibril/error.hpp"
#include "fibril/io.hpp"
#include "fibril/rng.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace fibril {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(Activation a) { return a == Activation::tanh ? "tanh" : "identity"; }

Activation activation_from_string(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw DomainError("unknown activation '" + std::string(name) + "'");
}

std::vector<Index> MlpModel::layer_sizes() const {
  std::vector<Index> sizes;
  if (weights.empty()) return sizes;
  sizes.push_back(weights.front().cols());
  for (const auto& W : weights) sizes.push_back(W.rows());
  return sizes;
}

Index MlpModel::parameter_count() const {
  Index n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

MlpModel init_mlp(const InputTransform& transform, std::span<const Index> hidden_widths, std::uint64_t seed,
                  Activation hidden) {
  MlpModel m;
  m.transform = transform;
  m.hidden_activation = hidden;
  Rng rng(seed);
  Index in = transform.feature_width();
  auto add_layer = [&](Index out) {
    if (out < 1) throw DomainError("layer widths must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    MatrixXd W(out, in);
    for (Index j = 0; j < in; ++j)
      for (Index i = 0; i < out; ++i) W(i, j) = rng.uniform(-limit, limit);
    m.weights.push_back(std::move(W));
    m.biases.push_back(VectorXd::Zero(out));
    in = out;
  };
  for (Index w : hidden_widths) add_layer(w);
  add_layer(1);
  return m;
}

namespace {

void check_model(const MlpModel& m) {
  if (m.weights.empty() || m.weights.size() != m.biases.size()) throw DomainError("malformed MLP");
  if (m.weights.front().cols() != m.transform.feature_width()) throw DomainError("MLP input layer does not match its transform");
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    if (m.biases[l].size() != m.weights[l].rows()) throw DomainError("MLP bias size mismatch");
    if (l > 0 && m.weights[l].cols() != m.weights[l - 1].rows()) throw DomainError("MLP layers are not contiguous");
  }
  if (m.weights.back().rows() != 1) throw DomainError("MLP output must be scalar");
}

void check_width(const MlpModel& m, Index width) {
  if (width != m.transform.input_width) {
    std::ostringstream msg;
    msg << "input has width " << width << ", model expects " << m.transform.input_width;
    throw DomainError(msg.str());
  }
}

void activate(MatrixXd& Z, Activation a) {
  if (a == Activation::tanh) Z = Z.array().tanh().matrix();
}

// Columns of U are feature vectors; returns the 1 x n output row.
MatrixXd forward_features(const MlpModel& m, const MatrixXd& U) {
  MatrixXd A = U;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    MatrixXd Z = m.weights[l] * A;
    Z.colwise() += m.biases[l];
    if (l + 1 < m.weights.size()) activate(Z, m.hidden_activation);
    A = std::move(Z);
  }
  return A;
}

// Gradient store shaped like the model.
struct Grads {
  std::vector<MatrixXd> W;
  std::vector<VectorXd> b;
  explicit Grads(const MlpModel& m) {
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
      W.push_back(MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
      b.push_back(VectorXd::Zero(m.biases[l].size()));
    }
  }
};

// Forward + backward of the mean squared error on one batch. Returns the loss.
double backprop(const MlpModel& m, const MatrixXd& U, const Eigen::RowVectorXd& y, Grads& g,
                std::vector<MatrixXd>& acts) {
  const std::size_t L = m.weights.size();
  acts.resize(L + 1);
  acts[0] = U;
  for (std::size_t l = 0; l < L; ++l) {
    MatrixXd Z = m.weights[l] * acts[l];
    Z.colwise() += m.biases[l];
    if (l + 1 < L) activate(Z, m.hidden_activation);
    acts[l + 1] = std::move(Z);
  }
  const double n = static_cast<double>(U.cols());
  const Eigen::RowVectorXd r = acts[L].row(0) - y;
  MatrixXd delta = (2.0 / n) * r;
  for (std::size_t l = L; l-- > 0;) {
    g.W[l].noalias() = delta * acts[l].transpose();
    g.b[l] = delta.rowwise().sum();
    if (l == 0) break;
    MatrixXd back = m.weights[l].transpose() * delta;
    if (m.hidden_activation == Activation::tanh) back.array() *= 1.0 - acts[l].array().square();
    delta = std::move(back);
  }
  return r.squaredNorm() / n;
}

double mse_on(const MlpModel& m, const MatrixXd& U, const VectorXd& y) {
  if (U.cols() == 0) return std::numeric_limits<double>::quiet_NaN();
  return (forward_features(m, U).row(0).transpose() - y).squaredNorm() / static_cast<double>(y.size());
}

}  // namespace

VectorXd forward_batch(const MlpModel& model, const MatrixXd& X) {
  check_model(model);
  check_width(model, X.cols());
  return forward_features(model, model.transform.apply(X).transpose()).row(0).transpose();
}

double forward(const MlpModel& model, const VectorXd& c) { return forward_batch(model, c.transpose())[0]; }

VectorXd input_gradient(const MlpModel& model, const VectorXd& c) {
  check_model(model);
  check_width(model, c.size());
  const std::size_t L = model.weights.size();
  std::vector<VectorXd> acts(L);
  acts[0] = model.transform.apply(c.transpose()).row(0).transpose();
  for (std::size_t l = 0; l + 1 < L; ++l) {
    VectorXd z = model.weights[l] * acts[l] + model.biases[l];
    if (model.hidden_activation == Activation::tanh) z = z.array().tanh().matrix();
    acts[l + 1] = std::move(z);
  }
  VectorXd delta = model.weights[L - 1].row(0).transpose();
  for (std::size_t l = L - 1; l-- > 0;) {
    if (model.hidden_activation == Activation::tanh) delta.array() *= 1.0 - acts[l + 1].array().square();
    delta = model.weights[l].transpose() * delta;
  }
  return model.transform.pullback(delta);
}

TrainResult train_mlp(const MlpModel& init, const MatrixXd& X, const VectorXd& y, const MatrixXd& X_val,
                      const VectorXd& y_val, const TrainConfig& config) {
  check_model(init);
  if (X.rows() != y.size() || X_val.rows() != y_val.size()) throw DomainError("design and label counts differ");
  if (X.rows() == 0) throw DomainError("empty training set");
  check_width(init, X.cols());
  if (X_val.rows() > 0) check_width(init, X_val.cols());
  if (config.epochs < 0) throw DomainError("epochs must be non-negative");
  if (!(config.learning_rate > 0.0)) throw DomainError("learning_rate must be positive");

  const MatrixXd U = init.transform.apply(X).transpose();
  const MatrixXd U_val = X_val.rows() > 0 ? MatrixXd(init.transform.apply(X_val).transpose()) : MatrixXd();
  const bool has_val = U_val.cols() > 0;
  const Index n = U.cols();
  const Index batch = config.batch_size <= 0 ? n : std::min(config.batch_size, n);
  const int decay_every = config.decay_every > 0 ? config.decay_every : std::max(1, config.epochs / 3);

  TrainResult result;
  MlpModel model = init;
  result.log.push_back({0, mse_on(model, U, y), mse_on(model, U_val, y_val)});
  result.model = model;
  double best = result.log.back().val_mse;

  Grads g(model), m1(model), m2(model);
  std::vector<MatrixXd> acts;
  MatrixXd Ub(U.rows(), batch);
  Eigen::RowVectorXd yb(batch);
  Rng rng(config.seed);
  long step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = config.learning_rate * std::pow(config.lr_decay, (epoch - 1) / decay_every);
    const auto order = rng.permutation(static_cast<std::size_t>(n));
    for (Index start = 0; start < n; start += batch) {
      const Index len = std::min(batch, n - start);
      Ub.resize(U.rows(), len);
      yb.resize(len);
      for (Index k = 0; k < len; ++k) {
        const auto src = static_cast<Index>(order[static_cast<std::size_t>(start + k)]);
        Ub.col(k) = U.col(src);
        yb[k] = y[src];
      }
      const double loss = backprop(model, Ub, yb, g, acts);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << " (learning rate " << lr << ")";
        throw DomainError(msg.str());
      }
      ++step;
      if (config.optimizer == Optimizer::sgd) {
        for (std::size_t l = 0; l < model.weights.size(); ++l) {
          model.weights[l] -= lr * g.W[l];
          model.biases[l] -= lr * g.b[l];
        }
        continue;
      }
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      auto adam = [&](auto& param, auto& grad, auto& mom, auto& var) {
        mom = config.beta1 * mom + (1.0 - config.beta1) * grad;
        var = config.beta2 * var + (1.0 - config.beta2) * grad.cwiseProduct(grad);
        param.array() -= lr * (mom.array() / c1) / ((var.array() / c2).sqrt() + config.epsilon);
      };
      for (std::size_t l = 0; l < model.weights.size(); ++l) {
        adam(model.weights[l], g.W[l], m1.W[l], m2.W[l]);
        adam(model.biases[l], g.b[l], m1.b[l], m2.b[l]);
      }
    }
    EpochLog entry{epoch, mse_on(model, U, y), mse_on(model, U_val, y_val)};
    if (!std::isfinite(entry.train_mse)) {
      std::ostringstream msg;
      msg << "training diverged at epoch " << epoch << " (learning rate " << lr << ")";
      throw DomainError(msg.str());
    }
    result.log.push_back(entry);
    if (!has_val || entry.val_mse < best) {
      best = entry.val_mse;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

void write_training_log_csv(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,train_mse,val_mse\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << format_double(e.train_mse) << ',';
    if (std::isfinite(e.val_mse)) out << format_double(e.val_mse);
    out << '\n';
  }
}

}  // namespace fibril
