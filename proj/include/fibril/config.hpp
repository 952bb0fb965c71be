#pragma once

#include "fibril/dataset.hpp"
#include "fibril/geometry.hpp"
#include "fibril/mlp.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fibril {

inline constexpr const char* kToolVersion = "1.0.0";

struct LayoutConfig {
  LayoutKind kind = LayoutKind::circle;
  double size = 16.5;  // R/a, half-side/a or circumradius/a
  double spacing = 3.0;
  std::string csv;  // custom layout file; overrides kind/size/spacing
};

struct FibrilConfig {
  double length_ratio = 5.0;
  double poisson_ratio = 0.5;
  double modulus_ratio_raw = 1.0;  // E_f / E
};

struct SimulateConfig {
  double beta_x = 0.0;
  double beta_y = 0.0;
  std::string design_csv;  // column "C" per fibril; empty = uniform template
  double delta_D = 0.0;    // > 0 selects the stepped simulator
};

struct DatasetConfig {
  long n_samples = 2500;
  std::optional<double> mean_compliance;      // default: template compliance
  std::optional<std::array<double, 2>> bounds;  // default: [C̄/10, 10 C̄]
  double filter_ceiling = 0.7;
  SamplingStyle style = SamplingStyle::radial_smooth;
  int radial_degree = 3;
  double max_amplitude = 0.9;
  double test_fraction = 0.2;
  double min_acceptance = 0.01;
  long probe_batch = 200;
};

struct TrainSection {
  std::vector<int> grid_layers{1, 2, 4, 6};
  std::vector<int> grid_widths{16, 32, 64};
  int cv_folds = 5;
  int cv_epochs = 100;
  TrainConfig mlp;  // final and reference fits
  double validation_fraction = 0.1;  // checkpoint subset carved from the training split
  bool project_inputs = true;
  double rank_tol = 1e-8;
  bool compare_models = true;
  double linear_ridge = 0.0;
  double polynomial_ridge = 1e-8;
  long rbf_centers = 100;
  std::vector<double> rbf_widths{0.5, 1.0, 2.0, 4.0};
  double rbf_ridge = 1e-8;
  std::vector<std::array<int, 2>> reference_mlps{{1, 64}, {6, 64}};
};

enum class RetrainMode { fresh, warm };

struct DesignSection {
  int n_starts = 100;
  int max_iters = 2000;
  double step_size = 10.0;
  int max_halvings = 20;
  double tolerance = 1e-7;
  int window = 5;
  bool enforce_mean = true;
  std::optional<SamplingStyle> init_style;  // default: the dataset style
  int feedback_rounds = 4;
  int feedback_k = 20;
  RetrainMode retrain = RetrainMode::fresh;
  int warm_epochs = 100;
  double warm_learning_rate = 1e-3;
  int top_profiles = 5;
};

/// One declarative document for a whole run.
struct RunConfig {
  std::uint64_t seed = 2024;
  std::string output_dir = "runs/desk";
  int threads = 1;
  LayoutConfig layout;
  FibrilConfig fibril;
  SimulateConfig simulate;
  DatasetConfig dataset;
  TrainSection train;
  DesignSection design;
};

/// Parses and validates; unknown keys and bad values throw ConfigError.
RunConfig parse_config(const std::string& json_text, const std::string& source = "config");
RunConfig load_config(const std::filesystem::path& path);
/// Fully resolved config as JSON (defaults filled in).
std::string config_to_json(const RunConfig& config);
/// FNV-1a 64 digest as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);
/// Digest of the resolved config without output_dir and threads.
std::string config_hash(const RunConfig& config);
void validate(const RunConfig& config);

/// Layout, template and mean compliance implied by a config.
FibrilArray build_layout(const RunConfig& config);
FibrilSpec fibril_template(const RunConfig& config);
double mean_compliance(const RunConfig& config);

}  // namespace fibril
