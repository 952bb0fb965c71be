#include "fibril/model.hpp"

#include "fibril/error.hpp"
#include "fibril/io.hpp"

#include "json.hpp"

#include <sstream>

namespace fibril {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::ordered_json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

ordered_json matrix_to_json(const MatrixXd& M) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(M.size()));
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) flat.push_back(M(i, j));
  return {{"rows", M.rows()}, {"cols", M.cols()}, {"data", flat}};
}

MatrixXd matrix_from_json(const ordered_json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Index>(flat.size()) != rows * cols) {
    throw DomainError("matrix data does not match its shape");
  }
  MatrixXd M(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j2 = 0; j2 < cols; ++j2) M(i, j2) = flat[static_cast<std::size_t>(i * cols + j2)];
  return M;
}

VectorXd vector_from_json(const ordered_json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

ordered_json transform_to_json(const InputTransform& t) {
  return {{"center", t.center}, {"scale", t.scale}, {"input_width", t.input_width}, {"basis", matrix_to_json(t.basis)}};
}

InputTransform transform_from_json(const ordered_json& j) {
  InputTransform t;
  t.center = j.at("center").get<double>();
  t.scale = j.at("scale").get<double>();
  t.input_width = j.at("input_width").get<Index>();
  t.basis = matrix_from_json(j.at("basis"));
  if (t.basis.size() != 0 && t.basis.rows() != t.input_width) throw DomainError("projection basis does not match input width");
  if (!(t.scale > 0.0)) throw DomainError("transform scale must be positive");
  return t;
}

void check_finite(const MatrixXd& M) {
  if (!M.allFinite()) throw DomainError("model parameters must be finite");
}

}  // namespace

double predict(const Surrogate& model, const VectorXd& c) {
  return std::visit(overloaded{[&](const RegressionModel& m) { return predict(m, c); },
                               [&](const MlpModel& m) { return forward(m, c); }},
                    model);
}

VectorXd predict_batch(const Surrogate& model, const MatrixXd& X) {
  return std::visit(overloaded{[&](const RegressionModel& m) { return predict_batch(m, X); },
                               [&](const MlpModel& m) { return forward_batch(m, X); }},
                    model);
}

VectorXd input_gradient(const Surrogate& model, const VectorXd& c) {
  return std::visit([&](const auto& m) { return input_gradient(m, c); }, model);
}

Index input_width(const Surrogate& model) {
  return std::visit([](const auto& m) { return m.transform.input_width; }, model);
}

Index parameter_count(const Surrogate& model) {
  return std::visit([](const auto& m) { return m.parameter_count(); }, model);
}

std::string describe(const Surrogate& model) {
  return std::visit(overloaded{[](const RegressionModel& m) { return std::string(to_string(m.variant)); },
                               [](const MlpModel& m) {
                                 std::ostringstream s;
                                 s << "mlp" << m.hidden_layers() << 'x'
                                   << (m.hidden_layers() > 0 ? m.weights.front().rows() : 0);
                                 return s.str();
                               }},
                    model);
}

void require_input_width(const Surrogate& model, Index n_fibrils) {
  if (input_width(model) != n_fibrils) {
    std::ostringstream msg;
    msg << "model expects " << input_width(model) << " fibrils but the layout has " << n_fibrils;
    throw DomainError(msg.str());
  }
}

std::string model_to_json(const Surrogate& model) {
  ordered_json j;
  j["schema_version"] = kModelSchemaVersion;
  std::visit(overloaded{[&](const RegressionModel& m) {
                          j["kind"] = "regression";
                          j["variant"] = std::string(to_string(m.variant));
                          j["transform"] = transform_to_json(m.transform);
                          j["weights"] = to_std(m.weights);
                          j["bias"] = m.bias;
                          j["centers"] = matrix_to_json(m.centers);
                          j["width"] = m.width;
                          j["ridge"] = m.ridge;
                        },
                        [&](const MlpModel& m) {
                          j["kind"] = "mlp";
                          j["hidden_activation"] = std::string(to_string(m.hidden_activation));
                          j["output_activation"] = "identity";
                          j["layer_sizes"] = m.layer_sizes();
                          j["transform"] = transform_to_json(m.transform);
                          ordered_json layers = ordered_json::array();
                          for (std::size_t l = 0; l < m.weights.size(); ++l)
                            layers.push_back({{"weights", matrix_to_json(m.weights[l])}, {"bias", to_std(m.biases[l])}});
                          j["layers"] = std::move(layers);
                        }},
             model);
  return j.dump(1) + "\n";
}

Surrogate model_from_json(const std::string& text, const std::string& source) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source, e.what());
  }
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kModelSchemaVersion) {
      throw DomainError("unsupported model schema version " + std::to_string(version) + " (this build reads " +
                        std::to_string(kModelSchemaVersion) + ")");
    }
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "regression") {
      RegressionModel m;
      m.variant = regression_variant_from_string(j.at("variant").get<std::string>());
      m.transform = transform_from_json(j.at("transform"));
      m.weights = vector_from_json(j.at("weights"));
      m.bias = j.at("bias").get<double>();
      m.centers = matrix_from_json(j.at("centers"));
      m.width = j.at("width").get<double>();
      m.ridge = j.at("ridge").get<double>();
      const Index k = m.transform.feature_width();
      const Index expected = m.variant == RegressionVariant::linear_with_bias     ? k
                             : m.variant == RegressionVariant::polynomial_degree3 ? 3 * k
                                                                                  : m.centers.rows();
      if (m.weights.size() != expected) throw DomainError("regression weights do not match the feature map");
      if (m.variant == RegressionVariant::gaussian_rbf && (m.centers.cols() != k || !(m.width > 0.0))) {
        throw DomainError("malformed RBF centers");
      }
      check_finite(m.weights);
      check_finite(m.centers);
      return m;
    }
    if (kind == "mlp") {
      MlpModel m;
      m.hidden_activation = activation_from_string(j.at("hidden_activation").get<std::string>());
      m.transform = transform_from_json(j.at("transform"));
      for (const auto& layer : j.at("layers")) {
        m.weights.push_back(matrix_from_json(layer.at("weights")));
        m.biases.push_back(vector_from_json(layer.at("bias")));
        check_finite(m.weights.back());
        check_finite(m.biases.back());
      }
      if (m.weights.empty() || m.weights.front().cols() != m.transform.feature_width()) {
        throw DomainError("MLP input layer does not match its transform");
      }
      for (std::size_t l = 0; l < m.weights.size(); ++l) {
        if (m.biases[l].size() != m.weights[l].rows() || (l > 0 && m.weights[l].cols() != m.weights[l - 1].rows())) {
          throw DomainError("MLP layer shapes are not contiguous");
        }
      }
      if (m.weights.back().rows() != 1) throw DomainError("MLP output must be scalar");
      return m;
    }
    throw DomainError("unknown model kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(source, e.what());
  }
}

void save_model(const Surrogate& model, const std::filesystem::path& path) { write_text_file(path, model_to_json(model)); }

Surrogate load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DomainError("no model at " + path.string());
  return model_from_json(read_text_file(path), path.string());
}

}  // namespace fibril
