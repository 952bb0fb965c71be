#pragma once

#include "fibril/mlp.hpp"
#include "fibril/regression.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>

namespace fibril {

inline constexpr int kModelSchemaVersion = 1;

/// Any trained predictor; all expose value and input-gradient queries.
using Surrogate = std::variant<RegressionModel, MlpModel>;

double predict(const Surrogate& model, const Eigen::VectorXd& c);
Eigen::VectorXd predict_batch(const Surrogate& model, const Eigen::MatrixXd& X);
Eigen::VectorXd input_gradient(const Surrogate& model, const Eigen::VectorXd& c);
Eigen::Index input_width(const Surrogate& model);
Eigen::Index parameter_count(const Surrogate& model);
std::string describe(const Surrogate& model);

/// Throws DomainError when the model was trained for a different fibril count.
void require_input_width(const Surrogate& model, Eigen::Index n_fibrils);

// JSON: schema version, kind, transform constants, row-major weights.
std::string model_to_json(const Surrogate& model);
Surrogate model_from_json(const std::string& text, const std::string& source = "model");
void save_model(const Surrogate& model, const std::filesystem::path& path);
Surrogate load_model(const std::filesystem::path& path);

}  // namespace fibril
