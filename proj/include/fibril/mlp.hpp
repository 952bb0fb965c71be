#pragma once

#include "fibril/surrogate.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace fibril {

enum class Activation { tanh, identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Fully connected regressor: hidden layers use `hidden_activation`, the
/// output layer is affine. A "k-layer MLP" has k hidden layers.
struct MlpModel {
  InputTransform transform;
  std::vector<Eigen::MatrixXd> weights;  // layer l: (out x in)
  std::vector<Eigen::VectorXd> biases;
  Activation hidden_activation = Activation::tanh;

  /// Feature width, hidden widths..., 1.
  std::vector<Eigen::Index> layer_sizes() const;
  Eigen::Index hidden_layers() const { return static_cast<Eigen::Index>(weights.size()) - 1; }
  Eigen::Index parameter_count() const;
};

/// Glorot-uniform weights, zero biases.
MlpModel init_mlp(const InputTransform& transform, std::span<const Eigen::Index> hidden_widths, std::uint64_t seed,
                  Activation hidden = Activation::tanh);

double forward(const MlpModel& model, const Eigen::VectorXd& c);
/// Rows of X are designs.
Eigen::VectorXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& X);
/// Exact reverse-mode d(prediction)/dc.
Eigen::VectorXd input_gradient(const MlpModel& model, const Eigen::VectorXd& c);

enum class Optimizer { adam, sgd };

struct TrainConfig {
  int epochs = 600;
  Eigen::Index batch_size = 32;  // <= 0 means full batch
  Optimizer optimizer = Optimizer::adam;
  double learning_rate = 1e-3;
  /// Step schedule: the rate is multiplied by lr_decay every decay_every
  /// epochs (0 picks epochs / 3).
  double lr_decay = 0.3;
  int decay_every = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;  // batch order
};

struct EpochLog {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  MlpModel model;  // best-validation checkpoint (last epoch without validation data)
  std::vector<EpochLog> log;  // epoch 0 is the initialization
  int best_epoch = 0;
};

/// Mini-batch training on MSE starting from `init`. Pass empty validation
/// matrices to disable checkpoint selection.
TrainResult train_mlp(const MlpModel& init, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const Eigen::MatrixXd& X_val, const Eigen::VectorXd& y_val, const TrainConfig& config);

// epoch,train_mse,val_mse
void write_training_log_csv(std::ostream& out, const std::vector<EpochLog>& log);

}  // namespace fibril
