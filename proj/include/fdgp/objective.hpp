#ifndef FDGP_OBJECTIVE_HPP
#define FDGP_OBJECTIVE_HPP

#include "fdgp/data.hpp"
#include "fdgp/features.hpp"
#include "fdgp/linalg.hpp"

#include <Eigen/Dense>

namespace fdgp {

/// θ = (w, α, σ²).
struct HyperParams {
  VectorXd w;
  FeatureMapParams alpha;
  double sigma2 = 1.0;

  Eigen::Index packed_size() const { return w.size() + alpha.size() + 1; }

  /// [w; α; σ²].
  VectorXd pack() const;

  /// Inverse of pack(); α receives a fresh stamp.
  void unpack(const VectorXd& packed);
};

/// Gradient over θ in the same blocks as HyperParams.
struct ThetaGradient {
  VectorXd w;
  VectorXd alpha;
  double sigma2 = 0.0;

  VectorXd pack() const;
  double norm() const { return pack().norm(); }
};

/// Rows of `data` picked by `batch`, in batch order.
std::pair<MatrixXd, VectorXd> gather(const Dataset& data, const IndexBatch& batch);

/// Full index batch 0, 1, …, n−1.
IndexBatch full_batch(Eigen::Index n);

/// g_i from a precomputed feature vector:
/// (1/σ²)(φᵀw − y)² + ‖w‖²/n + ((n−d)/n)·log σ².
double sample_loss(const VectorXd& phi, const VectorXd& w, double sigma2, double y, Eigen::Index n);

/// g_i(θ) for the sample (x_i, y_i) of a dataset of size n.
double g_i(const FeatureMap& map, const HyperParams& theta, const VectorXd& x_i, double y_i,
           Eigen::Index n);

/// φφᵀ + (σ²/n)·I.
MatrixXd sample_information(const VectorXd& phi, double sigma2, Eigen::Index n);

/// F_i(θ) for the sample x_i of a dataset of size n.
MatrixXd F_i(const FeatureMap& map, const HyperParams& theta, const VectorXd& x_i, Eigen::Index n);

/// Σ_{i∈S} F_i = Z_SᵀZ_S + (s/n)σ²I for the feature rows Z_S.
MatrixXd batch_information(const MatrixXd& Z_S, double sigma2, Eigen::Index n);

/// F(θ) = ZᵀZ + σ²I.
MatrixXd information_matrix(const MatrixXd& Z, double sigma2);

/// l(θ) = (1/σ²)‖Zw − y‖² + ‖w‖² + log|F(θ)| + (n−d)·log σ².
double full_loss(const FeatureMap& map, const HyperParams& theta, const Dataset& data);

/// Analytic ∇l(θ), assembled in matrix form over the whole dataset.
ThetaGradient full_loss_gradient(const FeatureMap& map, const HyperParams& theta,
                                 const Dataset& data);

/// ŵ = (ZᵀZ + σ²I)⁻¹Zᵀy, the minimizer of (1/σ²)‖Zw − y‖² + ‖w‖².
VectorXd ridge_closed_form(const MatrixXd& Z, const VectorXd& y, double sigma2);

/// min_w l(θ), evaluated in feature space at w = ŵ. O(nd² + d³).
double profile_loss(const FeatureMap& map, const FeatureMapParams& alpha, double sigma2,
                    const Dataset& data);

/// yᵀ(K + σ²I)⁻¹y + log|K + σ²I| with K = ZZᵀ formed explicitly (n×n).
double exact_nll_oracle(const FeatureMap& map, const FeatureMapParams& alpha, double sigma2,
                        const Dataset& data);

/// Negative log marginal likelihood per sample:
/// (raw + n·log 2π) / (2n), where raw is the quadratic form plus log-determinant.
double normalized_nll(double raw, Eigen::Index n);

/// Both sides of bᵀ(VVᵀ + λI)⁻¹b = min_w (1/λ)‖Vw − b‖² + ‖w‖².
struct RidgeIdentity {
  double lhs = 0.0;
  double rhs = 0.0;

  bool holds(double tol = 1e-8) const;
};

RidgeIdentity ridge_identity_check(const MatrixXd& V, const VectorXd& b, double lambda);

/// Σ_{i∈batch} ∇_θ[g_i(θ) + ⟨M, F_i(θ)⟩] with M held fixed.
ThetaGradient grad_theta_of_linearized(const FeatureMap& map, const HyperParams& theta,
                                       const IndexBatch& batch, const MatrixXd& M,
                                       const Dataset& data);

namespace detail {

/// Shared kernel of the linearized gradients. `weighted` holds, per batch row,
/// the φ-direction of the ⟨M, F_i⟩-type term (for symmetric M: 2Mφ_i), and
/// `sigma2_weight` its σ²-derivative per sample. `scale` multiplies the whole
/// result.
ThetaGradient linearized_gradient(const FeatureMap& map, const HyperParams& theta,
                                  const FeatureBatch& features, const VectorXd& y_S,
                                  const MatrixXd& weighted, double sigma2_weight, Eigen::Index n,
                                  double scale = 1.0);

}  // namespace detail

}  // namespace fdgp

#endif  // FDGP_OBJECTIVE_HPP
