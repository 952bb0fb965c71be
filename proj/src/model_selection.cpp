#include "fibril/model_selection.hpp"

namespace fibril {

std::vector<int> kfold_assignment(Eigen::Index n, int k, std::uint64_t seed) {
  if (k < 2) throw DomainError("cross-validation needs at least 2 folds");
  if (n < k) throw DomainError("folds would hold fewer than one sample");
  Rng rng(seed);
  const auto perm = rng.permutation(static_cast<std::size_t>(n));
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (std::size_t pos = 0; pos < perm.size(); ++pos)
    fold[perm[pos]] = static_cast<int>(static_cast<long long>(pos) * k / n);
  return fold;
}

}  // namespace fibril
