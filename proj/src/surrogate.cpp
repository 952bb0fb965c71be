#include "fibril/surrogate.hpp"

#include "fibril/error.hpp"

#include <Eigen/SVD>

namespace fibril {

InputTransform standardize(double mean_c, Eigen::Index width) {
  if (!(mean_c > 0.0)) throw DomainError("standardization needs a positive mean compliance");
  InputTransform t;
  t.center = mean_c;
  t.scale = mean_c;
  t.input_width = width;
  return t;
}

InputTransform fit_transform(const Eigen::MatrixXd& X, double mean_c, double rank_tol) {
  InputTransform t = standardize(mean_c, X.cols());
  if (X.rows() == 0) return t;
  const Eigen::MatrixXd Z = t.apply(X);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(Z, Eigen::ComputeThinV);
  const auto& sigma = svd.singularValues();
  if (sigma.size() == 0 || !(sigma[0] > 0.0)) return t;
  Eigen::Index k = 0;
  while (k < sigma.size() && sigma[k] > rank_tol * sigma[0]) ++k;
  if (k >= X.cols()) return t;
  t.basis = svd.matrixV().leftCols(k);
  return t;
}

}  // namespace fibril
