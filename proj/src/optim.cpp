#include "fdgp/optim.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace fdgp {

void ZetaBounds::validate() const {
  if (!(sigma_min > 0.0)) throw std::invalid_argument("bounds: sigma_min must be positive");
  if (!(sigma2_max >= sigma_min * sigma_min))
    throw std::invalid_argument("bounds: sigma2_max must be at least sigma_min²");
  if (!(eig_max >= sigma2_max))
    throw std::invalid_argument("bounds: eig_max must be at least sigma2_max");
  if (!(w_max > 0.0) || !(alpha_max > 0.0))
    throw std::invalid_argument("bounds: coordinate bounds must be positive");
}

void MinimaxConfig::validate() const {
  if (!(a >= 0.0) || !(b >= 0.0)) throw std::invalid_argument("minimax: step sizes must be non-negative");
  if (!(mu > 0.0)) throw std::invalid_argument("minimax: mu must be positive");
  bounds.validate();
}

std::pair<double, double> schedule_at(const Schedule& s, std::int64_t t) {
  if (t < 1) throw std::invalid_argument("schedule_at: t must be at least 1");
  if (s.kind == Schedule::Kind::constant) return {s.a0, s.b0};
  const auto td = static_cast<double>(t);
  return {s.a0 * std::pow(td, s.a_exponent), std::min(1.0, s.b0 * std::pow(td, s.b_exponent))};
}

// ---------------------------------------------------------------------------
// MINIMAX

double psi(const FeatureMap& map, const AugmentedState& zeta, const DualVariable& B,
           Eigen::Index i, double mu, const Dataset& data) {
  const Eigen::Index n = data.size();
  const VectorXd x = data.X.row(i).transpose();
  const VectorXd phi = map.features(zeta.theta.alpha, x.transpose()).row(0).transpose();
  const double norm_a = zeta.A.norm();
  if (!(norm_a > 0.0)) throw std::invalid_argument("psi: A is zero");
  const double g = sample_loss(phi, zeta.theta.w, zeta.theta.sigma2, data.y(i), n);
  const double h = SpdFactor(zeta.A).logdet() / static_cast<double>(n);
  const MatrixXd gap = zeta.A / static_cast<double>(n) - sample_information(phi, zeta.theta.sigma2, n);
  return g + h + mu * frobenius_dot(B.B, gap) / norm_a;
}

double minimax_objective(const FeatureMap& map, const AugmentedState& zeta, const DualVariable& B,
                         double mu, const Dataset& data) {
  const HyperParams& th = zeta.theta;
  const MatrixXd Z = map.features(th.alpha, data.X);
  const auto n = static_cast<double>(data.size());
  const auto d = static_cast<double>(Z.cols());
  const double g = (Z * th.w - data.y).squaredNorm() / th.sigma2 + th.w.squaredNorm() +
                   (n - d) * std::log(th.sigma2);
  const double norm_a = zeta.A.norm();
  if (!(norm_a > 0.0)) throw std::invalid_argument("minimax_objective: A is zero");
  const MatrixXd gap = zeta.A - information_matrix(Z, th.sigma2);
  return g + SpdFactor(zeta.A).logdet() + mu * frobenius_dot(B.B, gap) / norm_a;
}

namespace {

void check_minimax_shapes(const FeatureMap& map, const AugmentedState& zeta) {
  const Eigen::Index d = map.output_dim();
  if (zeta.A.rows() != d || zeta.A.cols() != d) throw DimensionMismatch("minimax: A must be d×d");
  if (zeta.theta.w.size() != d) throw DimensionMismatch("minimax: w must have length d");
}

MatrixXd dual_gradient_from_features(const MatrixXd& A, const MatrixXd& Z_S, double sigma2,
                                     Eigen::Index n, double mu) {
  const double scale = static_cast<double>(n) / static_cast<double>(Z_S.rows());
  // μ(n/s)Σ(A/n − F_i)/‖A‖ = μ(A − (n/s)ΣF_i)/‖A‖
  return mu * (A - scale * batch_information(Z_S, sigma2, n)) / A.norm();
}

}  // namespace

MinimaxGradient grad_psi(const FeatureMap& map, const AugmentedState& zeta, const DualVariable& B,
                         const IndexBatch& batch, double mu, const Dataset& data) {
  check_minimax_shapes(map, zeta);
  if (B.B.rows() != zeta.A.rows() || B.B.cols() != zeta.A.cols())
    throw DimensionMismatch("grad_psi: B must be d×d");
  const Eigen::Index n = data.size();
  const auto nd = static_cast<double>(n);
  const auto s = static_cast<double>(batch.size());
  const double scale = nd / s;
  const HyperParams& th = zeta.theta;
  const MatrixXd& A = zeta.A;
  const double norm_a = A.norm();
  if (!(norm_a > 0.0)) throw std::invalid_argument("grad_psi: A is zero");

  auto [X_S, y_S] = gather(data, batch);
  const FeatureBatch features = map.forward(th.alpha, X_S);
  const MatrixXd& Z = features.Z;

  MinimaxGradient out;

  // θ-block: ∇g_i − (μ/‖A‖)∇⟨B, F_i⟩, with ∂⟨B, F_i⟩/∂φ = (B + Bᵀ)φ and ∂/∂σ² = tr(B)/n.
  const MatrixXd Bsym2 = B.B + B.B.transpose();
  const MatrixXd weighted = (-mu / norm_a) * (Z * Bsym2);
  out.theta = detail::linearized_gradient(map, th, features, y_S, weighted,
                                          -mu * B.B.trace() / (nd * norm_a), n, scale);

  // A-block, summed over the batch and scaled by n/s:
  //   A⁻¹ + μB/‖A‖ − μ(n/s)Σ⟨B, A/n − F_i⟩·A/‖A‖³
  const double sum_gap = s / nd * frobenius_dot(B.B, A) -
                         ((Z * B.B).cwiseProduct(Z).sum() + s * th.sigma2 / nd * B.B.trace());
  MatrixXd GA = SpdFactor(A).inverse() + (mu / norm_a) * B.B -
                (mu * scale * sum_gap / (norm_a * norm_a * norm_a)) * A;
  out.A = symmetrize(GA);

  out.B = dual_gradient_from_features(A, Z, th.sigma2, n, mu);
  return out;
}

MatrixXd grad_psi_dual(const FeatureMap& map, const AugmentedState& zeta, const IndexBatch& batch,
                       double mu, const Dataset& data) {
  check_minimax_shapes(map, zeta);
  auto [X_S, y_S] = gather(data, batch);
  const MatrixXd Z = map.features(zeta.theta.alpha, X_S);
  return dual_gradient_from_features(zeta.A, Z, zeta.theta.sigma2, data.size(), mu);
}

DualVariable proj_omega2(const DualVariable& B) {
  const double norm = B.B.norm();
  if (norm <= 1.0) return B;
  return DualVariable{B.B / norm};
}

namespace {

// argmin over s of (s − s0)² + Σ_j max(s − λ_j, 0)², λ ascending.
double joint_noise_level(double s0, const VectorXd& eig) {
  const Eigen::Index d = eig.size();
  double prefix = 0.0;
  for (Eigen::Index k = 0; k <= d; ++k) {
    const double s = (s0 + prefix) / static_cast<double>(k + 1);
    const bool lower_ok = k == 0 || eig(k - 1) < s;
    const bool upper_ok = k == d || s <= eig(k);
    if (lower_ok && upper_ok) return s;
    if (k < d) prefix += eig(k);
  }
  return s0;  // unreachable for finite input
}

}  // namespace

AugmentedState proj_omega1(const AugmentedState& zeta, const ZetaBounds& bounds,
                           ProjectionMode mode) {
  AugmentedState out = zeta;
  const double s2_lo = bounds.sigma_min * bounds.sigma_min;

  out.theta.w = zeta.theta.w.cwiseMax(-bounds.w_max).cwiseMin(bounds.w_max);
  const VectorXd& a = zeta.theta.alpha.flat();
  const VectorXd a_clamped = a.cwiseMax(-bounds.alpha_max).cwiseMin(bounds.alpha_max);
  if (a_clamped != a) out.theta.alpha.assign(a_clamped);

  const MatrixXd A = symmetrize(zeta.A);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(A);
  if (eig.info() != Eigen::Success) throw std::runtime_error("proj_omega1: eigensolve failed");
  const VectorXd& lambda = eig.eigenvalues();

  double s2 = zeta.theta.sigma2;
  if (mode == ProjectionMode::joint) s2 = joint_noise_level(s2, lambda);
  s2 = std::clamp(s2, s2_lo, bounds.sigma2_max);
  out.theta.sigma2 = s2;

  if (lambda.size() > 0 && lambda.minCoeff() >= s2 && lambda.maxCoeff() <= bounds.eig_max) {
    out.A = A;
  } else {
    const VectorXd clamped = lambda.cwiseMax(s2).cwiseMin(bounds.eig_max);
    out.A = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
    out.A = symmetrize(out.A);
  }
  return out;
}

bool in_omega1(const AugmentedState& zeta, const ZetaBounds& bounds, double tol) {
  const double s2 = zeta.theta.sigma2;
  if (!(s2 >= bounds.sigma_min * bounds.sigma_min * (1.0 - 1e-12)) || s2 > bounds.sigma2_max)
    return false;
  if (zeta.theta.w.size() > 0 && zeta.theta.w.cwiseAbs().maxCoeff() > bounds.w_max) return false;
  if (zeta.theta.alpha.size() > 0 && zeta.theta.alpha.flat().cwiseAbs().maxCoeff() > bounds.alpha_max)
    return false;
  if (asymmetry(zeta.A) > 1e-12) return false;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(zeta.A, Eigen::EigenvaluesOnly);
  const VectorXd& lambda = eig.eigenvalues();
  const double scale = std::max(1.0, std::abs(lambda.maxCoeff()));
  return lambda.minCoeff() >= s2 - tol * scale && lambda.maxCoeff() <= bounds.eig_max * (1.0 + 1e-12);
}

bool in_omega2(const DualVariable& B, double tol) { return B.B.norm() <= 1.0 + tol; }

std::pair<AugmentedState, DualVariable> minimax_step(const FeatureMap& map,
                                                     const AugmentedState& zeta,
                                                     const DualVariable& B,
                                                     const IndexBatch& batch1,
                                                     const IndexBatch& batch2,
                                                     const MinimaxConfig& cfg, const Dataset& data) {
  const MinimaxGradient g = grad_psi(map, zeta, B, batch1, cfg.mu, data);

  AugmentedState moved = zeta;
  moved.theta = apply_step(zeta.theta, g.theta, cfg.a, 0.0);
  // σ² may leave the positive axis here; the projection restores it.
  moved.theta.sigma2 = zeta.theta.sigma2 - cfg.a * g.theta.sigma2;
  moved.A = zeta.A - (cfg.a_matrix < 0.0 ? cfg.a : cfg.a_matrix) * g.A;
  AugmentedState next = proj_omega1(moved, cfg.bounds, cfg.projection);

  const MatrixXd gB = grad_psi_dual(map, next, batch2, cfg.mu, data);
  DualVariable dual = proj_omega2(DualVariable{B.B + cfg.b * gB});
  return {std::move(next), std::move(dual)};
}

std::pair<AugmentedState, DualVariable> minimax_init(const FeatureMap& map, const HyperParams& theta,
                                                     const Dataset& data, const ZetaBounds& bounds,
                                                     const IndexBatch* first_batch,
                                                     ProjectionMode mode) {
  AugmentedState zeta;
  zeta.theta = theta;
  if (first_batch) {
    auto [X_S, y_S] = gather(data, *first_batch);
    const MatrixXd Z = map.features(theta.alpha, X_S);
    const double scale = static_cast<double>(data.size()) / static_cast<double>(Z.rows());
    zeta.A = scale * batch_information(Z, theta.sigma2, data.size());
  } else {
    zeta.A = information_matrix(map.features(theta.alpha, data.X), theta.sigma2);
  }
  const Eigen::Index d = map.output_dim();
  return {proj_omega1(zeta, bounds, mode), DualVariable{MatrixXd::Zero(d, d)}};
}

// ---------------------------------------------------------------------------
// SCGD / BSGD

HyperParams apply_step(const HyperParams& theta, const ThetaGradient& g, double a,
                       double sigma_min) {
  HyperParams out = theta;
  out.w -= a * g.w;
  if (g.alpha.size() > 0) out.alpha.assign(theta.alpha.flat() - a * g.alpha);
  out.sigma2 = std::max(theta.sigma2 - a * g.sigma2, sigma_min * sigma_min);
  return out;
}

SCGDState scgd_init(const FeatureMap& map, const HyperParams& theta, const Dataset& data,
                    const IndexBatch* first_batch) {
  SCGDState st;
  st.theta = theta;
  if (first_batch) {
    auto [X_S, y_S] = gather(data, *first_batch);
    const MatrixXd Z = map.features(theta.alpha, X_S);
    const double scale = static_cast<double>(data.size()) / static_cast<double>(Z.rows());
    st.F_tilde = scale * batch_information(Z, theta.sigma2, data.size());
  } else {
    st.F_tilde = information_matrix(map.features(theta.alpha, data.X), theta.sigma2);
  }
  return st;
}

namespace {

constexpr double kPdFloor = 1e-10;

// Factor F; on failure floor its spectrum at kPdFloor (updating F) and retry.
SpdFactor factor_with_floor(MatrixXd& F, std::int64_t iteration) {
  try {
    return SpdFactor(F);
  } catch (const NotPositiveDefinite&) {
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(F));
  if (eig.info() != Eigen::Success || !eig.eigenvalues().allFinite())
    throw OptimizerError(iteration, "tracked information matrix is not finite");
  F = eig.eigenvectors() * eig.eigenvalues().cwiseMax(kPdFloor).asDiagonal() *
      eig.eigenvectors().transpose();
  F = symmetrize(F);
  try {
    return SpdFactor(F);
  } catch (const NotPositiveDefinite& e) {
    throw OptimizerError(iteration, e.what());
  }
}

// Σ_{i∈S}∇[g_i + ⟨F⁻¹, F_i⟩] for features already computed.
ThetaGradient linearized_with_factor(const FeatureMap& map, const HyperParams& theta,
                                     const FeatureBatch& features, const VectorXd& y_S,
                                     const SpdFactor& F, Eigen::Index n) {
  // rows 2F⁻¹φ_i, via a solve against Z_Sᵀ
  const MatrixXd weighted = 2.0 * F.solve(MatrixXd(features.Z.transpose())).transpose();
  return detail::linearized_gradient(map, theta, features, y_S, weighted,
                                     F.inverse_trace() / static_cast<double>(n), n);
}

}  // namespace

ScgdDirection scgd_direction(const FeatureMap& map, const SCGDState& state,
                             const IndexBatch& batch, double b_t, const Dataset& data) {
  if (!(b_t > 0.0 && b_t <= 1.0)) throw std::invalid_argument("scgd: b_t must lie in (0, 1]");
  if (batch.size() == 0) throw std::invalid_argument("scgd: empty batch");
  const Eigen::Index n = data.size();
  auto [X_S, y_S] = gather(data, batch);
  const FeatureBatch features = map.forward(state.theta.alpha, X_S);
  const double scale = static_cast<double>(n) / static_cast<double>(batch.size());

  ScgdDirection out;
  out.F_tilde = (1.0 - b_t) * state.F_tilde +
                (b_t * scale) * batch_information(features.Z, state.theta.sigma2, n);
  const SpdFactor F = factor_with_floor(out.F_tilde, state.t);
  out.direction = linearized_with_factor(map, state.theta, features, y_S, F, n);
  return out;
}

SCGDState scgd_step(const FeatureMap& map, const SCGDState& state, const IndexBatch& batch,
                    double a_t, double b_t, const Dataset& data, double sigma_min) {
  ScgdDirection dir = scgd_direction(map, state, batch, b_t, data);
  SCGDState next;
  next.theta = apply_step(state.theta, dir.direction, a_t, sigma_min);
  next.F_tilde = std::move(dir.F_tilde);
  next.t = state.t + 1;
  return next;
}

double bsgd_batch_loss(const FeatureMap& map, const HyperParams& theta, const IndexBatch& batch,
                       const Dataset& data) {
  const Eigen::Index n = data.size();
  auto [X_S, y_S] = gather(data, batch);
  const MatrixXd Z = map.features(theta.alpha, X_S);
  double g = 0.0;
  for (Eigen::Index k = 0; k < Z.rows(); ++k)
    g += sample_loss(Z.row(k).transpose(), theta.w, theta.sigma2, y_S(k), n);
  return g + SpdFactor(batch_information(Z, theta.sigma2, n)).logdet();
}

ThetaGradient bsgd_direction(const FeatureMap& map, const HyperParams& theta,
                             const IndexBatch& batch, const Dataset& data) {
  if (batch.size() == 0) throw std::invalid_argument("bsgd: empty batch");
  const Eigen::Index n = data.size();
  auto [X_S, y_S] = gather(data, batch);
  const FeatureBatch features = map.forward(theta.alpha, X_S);
  // Deliberately unscaled: Σ_{i∈S}F_i, not (n/s)Σ_{i∈S}F_i.
  MatrixXd F = batch_information(features.Z, theta.sigma2, n);
  const SpdFactor factor = factor_with_floor(F, 0);
  return linearized_with_factor(map, theta, features, y_S, factor, n);
}

HyperParams bsgd_step(const FeatureMap& map, const HyperParams& theta, const IndexBatch& batch,
                      double a_t, const Dataset& data, double sigma_min) {
  return apply_step(theta, bsgd_direction(map, theta, batch, data), a_t, sigma_min);
}

}  // namespace fdgp
