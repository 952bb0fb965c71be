#pragma once

#include "fibril/geometry.hpp"
#include "fibril/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fibril {

inline constexpr int kDatasetFormatVersion = 1;

enum class SamplingStyle { iid_uniform, radial_smooth, mixed };

std::string_view to_string(SamplingStyle style);
SamplingStyle sampling_style_from_string(std::string_view name);

/// Raw generator settings for random designs at fixed mean.
struct SamplerConfig {
  double mean_c = 20.0 / 3.0;
  double c_lo = 2.0 / 3.0;
  double c_hi = 200.0 / 3.0;
  SamplingStyle style = SamplingStyle::radial_smooth;
  /// Degree of the radial polynomial p(r/R).
  int radial_degree = 3;
  /// Radial profiles are mean_c (1 + A p) with min p = -1 and A ~ U(0, max_amplitude),
  /// capped so no entry reaches a bound.
  double max_amplitude = 0.9;
};

/// Sampler defaults for a template compliance C̄: bounds [C̄/10, 10 C̄].
SamplerConfig default_sampler(double mean_c);

/// One feasible random design (entries in bounds, mean exactly mean_c).
Eigen::VectorXd sample_design(const FibrilArray& layout, const SamplerConfig& config, Rng& rng);

struct Sample {
  Eigen::VectorXd c;
  double strength = 0.0;
  bool feedback = false;  // appended by the designer loop, exempt from the ceiling
};

enum class SplitTag : std::uint8_t { train = 0, test = 1 };

struct Dataset {
  FibrilArray layout;
  SamplerConfig sampler;
  double filter_ceiling = 0.7;
  std::uint64_t master_seed = 0;
  std::vector<Sample> samples;
  std::vector<SplitTag> split;  // empty until assigned
  long candidates_drawn = 0;
  double acceptance_rate = 1.0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(samples.size()); }
  Eigen::Index width() const { return layout.size(); }
  /// Designs as rows, optionally restricted to one split tag.
  Eigen::MatrixXd designs() const;
  Eigen::VectorXd labels() const;
  std::vector<Eigen::Index> indices(SplitTag tag) const;
  Eigen::MatrixXd designs(std::span<const Eigen::Index> rows) const;
  Eigen::VectorXd labels(std::span<const Eigen::Index> rows) const;
};

struct GenerateConfig {
  Eigen::Index n_target = 2500;
  SamplerConfig sampler;
  double filter_ceiling = 0.7;  // strengths must be strictly below; > 1 disables
  std::uint64_t master_seed = 0;
  double min_acceptance = 0.01;
  long probe_batch = 200;
  int threads = 1;
};

/// Draws candidate k from the stream derive_seed(master, dataset, k), labels
/// it with the exact simulator and keeps it if below the ceiling. Candidates
/// are accepted in index order, so the result is independent of threading.
Dataset generate(const FibrilArray& layout, const GenerateConfig& config);

/// Random train/test tags with round(n * test_fraction) test samples.
std::vector<SplitTag> split(const Dataset& dataset, double test_fraction, std::uint64_t seed);

// Directory layout: dataset.json (metadata, layout, tags) + samples.csv.
void save(const Dataset& dataset, const std::filesystem::path& dir);

struct LoadOptions {
  /// Fraction of samples re-simulated on load (every k-th row).
  double verify_fraction = 0.01;
  double verify_tol = 1e-9;
};
Dataset load(const std::filesystem::path& dir, const LoadOptions& options = {});

}  // namespace fibril
