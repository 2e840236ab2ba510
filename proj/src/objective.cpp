#include "fdgp/objective.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace fdgp {

namespace {

void require_positive_noise(double sigma2, const char* where) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw std::invalid_argument(std::string(where) + ": noise variance must be positive");
}

}  // namespace

VectorXd HyperParams::pack() const {
  VectorXd out(packed_size());
  out << w, alpha.flat(), sigma2;
  return out;
}

void HyperParams::unpack(const VectorXd& packed) {
  if (packed.size() != packed_size()) throw DimensionMismatch("HyperParams::unpack: wrong size");
  w = packed.head(w.size());
  alpha.assign(packed.segment(w.size(), alpha.size()));
  sigma2 = packed(packed.size() - 1);
}

VectorXd ThetaGradient::pack() const {
  VectorXd out(w.size() + alpha.size() + 1);
  out << w, alpha, sigma2;
  return out;
}

std::pair<MatrixXd, VectorXd> gather(const Dataset& data, const IndexBatch& batch) {
  MatrixXd X(static_cast<Eigen::Index>(batch.size()), data.dim());
  VectorXd y(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Eigen::Index i = batch.indices[k];
    if (i < 0 || i >= data.size()) throw std::out_of_range("batch index out of range");
    X.row(static_cast<Eigen::Index>(k)) = data.X.row(i);
    y(static_cast<Eigen::Index>(k)) = data.y(i);
  }
  return {std::move(X), std::move(y)};
}

IndexBatch full_batch(Eigen::Index n) {
  IndexBatch b;
  b.n = n;
  b.indices.resize(static_cast<std::size_t>(n));
  std::iota(b.indices.begin(), b.indices.end(), Eigen::Index{0});
  return b;
}

double sample_loss(const VectorXd& phi, const VectorXd& w, double sigma2, double y,
                   Eigen::Index n) {
  require_positive_noise(sigma2, "g_i");
  const double r = phi.dot(w) - y;
  const auto nd = static_cast<double>(n);
  const auto d = static_cast<double>(phi.size());
  return r * r / sigma2 + w.squaredNorm() / nd + (nd - d) / nd * std::log(sigma2);
}

double g_i(const FeatureMap& map, const HyperParams& theta, const VectorXd& x_i, double y_i,
           Eigen::Index n) {
  const VectorXd phi = map.features(theta.alpha, x_i.transpose()).row(0).transpose();
  return sample_loss(phi, theta.w, theta.sigma2, y_i, n);
}

MatrixXd sample_information(const VectorXd& phi, double sigma2, Eigen::Index n) {
  MatrixXd F = phi * phi.transpose();
  F.diagonal().array() += sigma2 / static_cast<double>(n);
  return F;
}

MatrixXd F_i(const FeatureMap& map, const HyperParams& theta, const VectorXd& x_i,
             Eigen::Index n) {
  require_positive_noise(theta.sigma2, "F_i");
  const VectorXd phi = map.features(theta.alpha, x_i.transpose()).row(0).transpose();
  return sample_information(phi, theta.sigma2, n);
}

MatrixXd batch_information(const MatrixXd& Z_S, double sigma2, Eigen::Index n) {
  const Eigen::Index d = Z_S.cols();
  MatrixXd F = MatrixXd::Zero(d, d);
  F.selfadjointView<Eigen::Lower>().rankUpdate(Z_S.transpose());
  F.triangularView<Eigen::StrictlyUpper>() = F.transpose();
  F.diagonal().array() +=
      static_cast<double>(Z_S.rows()) / static_cast<double>(n) * sigma2;
  return F;
}

MatrixXd information_matrix(const MatrixXd& Z, double sigma2) {
  return batch_information(Z, sigma2, Z.rows());
}

double full_loss(const FeatureMap& map, const HyperParams& theta, const Dataset& data) {
  require_positive_noise(theta.sigma2, "full_loss");
  const MatrixXd Z = map.features(theta.alpha, data.X);
  const auto n = static_cast<double>(data.size());
  const auto d = static_cast<double>(Z.cols());
  const double fit = (Z * theta.w - data.y).squaredNorm() / theta.sigma2;
  const double logdet = SpdFactor(information_matrix(Z, theta.sigma2)).logdet();
  return fit + theta.w.squaredNorm() + logdet + (n - d) * std::log(theta.sigma2);
}

ThetaGradient full_loss_gradient(const FeatureMap& map, const HyperParams& theta,
                                 const Dataset& data) {
  require_positive_noise(theta.sigma2, "full_loss_gradient");
  const FeatureBatch batch = map.forward(theta.alpha, data.X);
  const MatrixXd& Z = batch.Z;
  const double s2 = theta.sigma2;
  const auto n = static_cast<double>(data.size());
  const auto d = static_cast<double>(Z.cols());
  const VectorXd r = Z * theta.w - data.y;
  const SpdFactor F(information_matrix(Z, s2));
  const MatrixXd Finv = F.inverse();

  ThetaGradient g;
  g.w = 2.0 / s2 * (Z.transpose() * r) + 2.0 * theta.w;
  // ∂l/∂Z = (2/σ²) r wᵀ + 2 Z F⁻¹
  const MatrixXd dZ = 2.0 / s2 * r * theta.w.transpose() + 2.0 * Z * Finv;
  g.alpha = map.backward(theta.alpha, batch, dZ);
  g.sigma2 = -r.squaredNorm() / (s2 * s2) + Finv.trace() + (n - d) / s2;
  return g;
}

VectorXd ridge_closed_form(const MatrixXd& Z, const VectorXd& y, double sigma2) {
  require_positive_noise(sigma2, "ridge_closed_form");
  if (Z.rows() != y.size()) throw DimensionMismatch("ridge_closed_form: row mismatch");
  return SpdFactor(information_matrix(Z, sigma2)).solve(VectorXd(Z.transpose() * y));
}

double profile_loss(const FeatureMap& map, const FeatureMapParams& alpha, double sigma2,
                    const Dataset& data) {
  require_positive_noise(sigma2, "profile_loss");
  const MatrixXd Z = map.features(alpha, data.X);
  const auto n = static_cast<double>(data.size());
  const auto d = static_cast<double>(Z.cols());
  const SpdFactor F(information_matrix(Z, sigma2));
  const VectorXd w = F.solve(VectorXd(Z.transpose() * data.y));
  const double fit = (Z * w - data.y).squaredNorm() / sigma2 + w.squaredNorm();
  return fit + F.logdet() + (n - d) * std::log(sigma2);
}

double exact_nll_oracle(const FeatureMap& map, const FeatureMapParams& alpha, double sigma2,
                        const Dataset& data) {
  require_positive_noise(sigma2, "exact_nll_oracle");
  const MatrixXd Z = map.features(alpha, data.X);
  MatrixXd C = Z * Z.transpose();
  C.diagonal().array() += sigma2;
  const SpdFactor K(C);
  return K.quad_form(data.y) + K.logdet();
}

double normalized_nll(double raw, Eigen::Index n) {
  const auto nd = static_cast<double>(n);
  return (raw + nd * std::log(2.0 * std::numbers::pi)) / (2.0 * nd);
}

bool RidgeIdentity::holds(double tol) const {
  return std::abs(lhs - rhs) <= tol * (1.0 + std::abs(lhs));
}

RidgeIdentity ridge_identity_check(const MatrixXd& V, const VectorXd& b, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("ridge_identity_check: lambda must be positive");
  if (V.rows() != b.size()) throw DimensionMismatch("ridge_identity_check: row mismatch");
  RidgeIdentity out;
  MatrixXd K = V * V.transpose();
  K.diagonal().array() += lambda;
  out.lhs = SpdFactor(K).quad_form(b);
  const VectorXd w = ridge_closed_form(V, b, lambda);
  out.rhs = (V * w - b).squaredNorm() / lambda + w.squaredNorm();
  return out;
}

namespace detail {

ThetaGradient linearized_gradient(const FeatureMap& map, const HyperParams& theta,
                                  const FeatureBatch& features, const VectorXd& y_S,
                                  const MatrixXd& weighted, double sigma2_weight, Eigen::Index n,
                                  double scale) {
  const MatrixXd& Z = features.Z;
  const double s2 = theta.sigma2;
  const auto nd = static_cast<double>(n);
  const auto d = static_cast<double>(Z.cols());
  const auto s = static_cast<double>(Z.rows());
  const VectorXd r = Z * theta.w - y_S;

  ThetaGradient g;
  g.w = scale * (2.0 / s2 * (Z.transpose() * r) + 2.0 * s / nd * theta.w);
  MatrixXd upstream = 2.0 / s2 * r * theta.w.transpose() + weighted;
  upstream *= scale;
  g.alpha = map.backward(theta.alpha, features, upstream);
  g.sigma2 = scale * (-r.squaredNorm() / (s2 * s2) + s * (nd - d) / (nd * s2) + s * sigma2_weight);
  return g;
}

}  // namespace detail

ThetaGradient grad_theta_of_linearized(const FeatureMap& map, const HyperParams& theta,
                                       const IndexBatch& batch, const MatrixXd& M,
                                       const Dataset& data) {
  require_positive_noise(theta.sigma2, "grad_theta_of_linearized");
  const Eigen::Index d = map.output_dim();
  if (M.rows() != d || M.cols() != d)
    throw DimensionMismatch("grad_theta_of_linearized: weight matrix must be d×d");
  if (theta.w.size() != d) throw DimensionMismatch("grad_theta_of_linearized: w must have length d");
  auto [X_S, y_S] = gather(data, batch);
  const FeatureBatch features = map.forward(theta.alpha, X_S);
  // ∂/∂φ φᵀMφ = (M + Mᵀ)φ
  const MatrixXd weighted = features.Z * (M + M.transpose()).transpose();
  return detail::linearized_gradient(map, theta, features, y_S, weighted,
                                     M.trace() / static_cast<double>(data.size()), data.size());
}

}  // namespace fdgp
