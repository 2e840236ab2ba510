#include "fdgp/predict.hpp"

#include <cmath>

namespace fdgp {

Posterior posterior(const FeatureMap& map, const FeatureMapParams& alpha, double sigma2,
                    const Dataset& train, const MatrixXd& test_X) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("posterior: noise variance must be positive");
  const MatrixXd Z = map.features(alpha, train.X);
  const MatrixXd Zs = map.features(alpha, test_X);
  const SpdFactor F(information_matrix(Z, sigma2));
  const VectorXd w = F.solve(VectorXd(Z.transpose() * train.y));
  // ‖L⁻¹z*‖² = z*ᵀF⁻¹z*
  MatrixXd half = Zs.transpose();
  F.llt().matrixL().solveInPlace(half);
  Posterior p;
  p.mean = Zs * w;
  p.variance = sigma2 * (1.0 + half.colwise().squaredNorm().transpose().array());
  return p;
}

VectorXd predict_with_weights(const FeatureMap& map, const FeatureMapParams& alpha,
                              const VectorXd& w, const MatrixXd& test_X) {
  return map.features(alpha, test_X) * w;
}

double rmse(const VectorXd& pred, const VectorXd& y) {
  if (pred.size() != y.size()) throw DimensionMismatch("rmse: length mismatch");
  if (pred.size() == 0) throw std::invalid_argument("rmse: empty input");
  return std::sqrt((pred - y).squaredNorm() / static_cast<double>(y.size()));
}

}  // namespace fdgp
