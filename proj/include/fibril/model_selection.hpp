#pragma once

#include "fibril/error.hpp"
#include "fibril/parallel.hpp"
#include "fibril/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

namespace fibril {

/// Fold index per sample: a seeded permutation cut into k contiguous chunks
/// whose sizes differ by at most one.
std::vector<int> kfold_assignment(Eigen::Index n, int k, std::uint64_t seed);

template <typename Cell>
struct CvTable {
  std::vector<Cell> cells;
  Eigen::MatrixXd fold_mse;  // cells x k
  Eigen::VectorXd mean_mse;
  std::vector<Eigen::Index> parameter_count;
  std::size_t best = 0;
};

/// Relative tolerance under which two mean validation errors count as tied.
inline constexpr double kCvTieTol = 1e-12;

/// Grid search with k-fold cross-validation.
///   fit(cell, X_train, y_train, X_val, y_val) -> predictions for X_val
///   params(cell) -> parameter count (tie-break: smaller model wins, then
///   grid order)
/// All (cell, fold) jobs are independent and may run concurrently.
template <typename Cell, typename Fit, typename Params>
CvTable<Cell> kfold_cv_grid(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<Cell>& grid, int k,
                            std::uint64_t seed, Fit&& fit, Params&& params, int threads = 1) {
  if (k < 2) throw DomainError("cross-validation needs at least 2 folds");
  if (grid.empty()) throw DomainError("empty hyperparameter grid");
  if (X.rows() != y.size()) throw DomainError("design and label counts differ");
  if (X.rows() < k) throw DomainError("folds would hold fewer than one sample");

  const auto folds = kfold_assignment(X.rows(), k, seed);
  CvTable<Cell> table;
  table.cells = grid;
  table.fold_mse.resize(static_cast<Eigen::Index>(grid.size()), k);
  const std::size_t jobs = grid.size() * static_cast<std::size_t>(k);
  parallel_for(jobs, threads, [&](std::size_t job) {
    const std::size_t cell = job / static_cast<std::size_t>(k);
    const int fold = static_cast<int>(job % static_cast<std::size_t>(k));
    std::vector<Eigen::Index> tr, va;
    for (Eigen::Index i = 0; i < X.rows(); ++i) (folds[static_cast<std::size_t>(i)] == fold ? va : tr).push_back(i);
    const Eigen::VectorXd pred = fit(grid[cell], Eigen::MatrixXd(X(tr, Eigen::all)), Eigen::VectorXd(y(tr)),
                                     Eigen::MatrixXd(X(va, Eigen::all)), Eigen::VectorXd(y(va)));
    table.fold_mse(static_cast<Eigen::Index>(cell), fold) = (pred - y(va)).squaredNorm() / static_cast<double>(va.size());
  });
  table.mean_mse = table.fold_mse.rowwise().mean();
  for (const auto& cell : grid) table.parameter_count.push_back(params(cell));
  for (std::size_t c = 1; c < grid.size(); ++c) {
    const double a = table.mean_mse[static_cast<Eigen::Index>(c)];
    const double b = table.mean_mse[static_cast<Eigen::Index>(table.best)];
    const bool tie = std::abs(a - b) <= kCvTieTol * std::max(std::abs(a), std::abs(b));
    if ((!tie && a < b) || (tie && table.parameter_count[c] < table.parameter_count[table.best])) table.best = c;
  }
  return table;
}

}  // namespace fibril
