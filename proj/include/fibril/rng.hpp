#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fibril {

// Seed derivation. Every random stream in the pipeline is keyed by
//   seed = splitmix64(splitmix64(master ^ stage_tag) + index)
// so a sample, fold or start owns its stream regardless of scheduling.
enum class Stage : std::uint64_t {
  dataset = 0x64617461,   // per-candidate sampler streams
  split = 0x73706c74,     // train/test assignment
  folds = 0x666f6c64,     // k-fold assignment
  train = 0x74726e00,     // network initialization and batch order
  rbf = 0x72626600,       // RBF center selection
  design = 0x64737467,    // designer starts
  validate = 0x76616c00,  // checkpoint validation subset
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, Stage stage, std::uint64_t index = 0);

/// Portable generator: mt19937_64 engine with hand-rolled transforms, since
/// the standard distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller, cached pair).
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fibril
