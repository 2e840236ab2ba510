#ifndef FDGP_OPTIM_HPP
#define FDGP_OPTIM_HPP

#include "fdgp/objective.hpp"

#include <cstdint>
#include <stdexcept>
#include <utility>

namespace fdgp {

/// Box and spectral limits that define the primal feasible set Ω₁.
struct ZetaBounds {
  double sigma_min = 1e-3;
  double sigma2_max = 1e6;
  double w_max = 1e6;      // |w_j| ≤ w_max
  double alpha_max = 1e6;  // |α_j| ≤ alpha_max
  double eig_max = 1e6;    // eigenvalues of A ≤ eig_max

  void validate() const;
};

enum class ProjectionMode {
  /// Clamp σ² first, then clamp the spectrum of A to [σ², eig_max].
  sequential,
  /// Exact Euclidean projection onto {(σ², A) : A ⪰ σ²I, …}.
  joint,
};

/// ζ = (θ, A).
struct AugmentedState {
  HyperParams theta;
  MatrixXd A;
};

/// Dual matrix B of the penalty, kept in the unit Frobenius ball Ω₂.
struct DualVariable {
  MatrixXd B;
};

struct MinimaxConfig {
  double a = 1e-3;          // primal step for θ
  double a_matrix = -1.0;   // primal step for A; negative means "same as a"
  double b = 1e-3;          // dual step
  double mu = 1.0;   // penalty weight
  ZetaBounds bounds;
  ProjectionMode projection = ProjectionMode::sequential;

  void validate() const;
};

/// θ plus the running estimate F̃ of F(θ).
struct SCGDState {
  HyperParams theta;
  MatrixXd F_tilde;
  std::int64_t t = 0;
};

/// Step-size rule. Polynomial: (a0·t^a_exponent, min(1, b0·t^b_exponent)).
struct Schedule {
  enum class Kind { constant, polynomial };
  Kind kind = Kind::constant;
  double a0 = 1e-3;
  double b0 = 0.9;
  double a_exponent = -0.75;
  double b_exponent = -0.5;
};

std::pair<double, double> schedule_at(const Schedule& s, std::int64_t t);

/// A failure inside an optimizer step, tagged with the iteration index.
class OptimizerError : public std::runtime_error {
 public:
  OptimizerError(std::int64_t iteration, const std::string& what)
      : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::int64_t iteration() const noexcept { return iteration_; }

 private:
  std::int64_t iteration_;
};

// ---------------------------------------------------------------------------
// MINIMAX: min over ζ ∈ Ω₁, max over B ∈ Ω₂ of
//   Ψ(ζ, B) = Σᵢ ψᵢ,  ψᵢ = g_i(θ) + h(A)/n + μ⟨B, A/n − F_i(θ)⟩/‖A‖.

/// ψ(ζ, B; x_i, μ).
double psi(const FeatureMap& map, const AugmentedState& zeta, const DualVariable& B,
           Eigen::Index i, double mu, const Dataset& data);

/// Ψ(ζ, B) in closed form: g(θ) + log|A| + μ⟨B, A − F(θ)⟩/‖A‖.
double minimax_objective(const FeatureMap& map, const AugmentedState& zeta, const DualVariable& B,
                         double mu, const Dataset& data);

struct MinimaxGradient {
  ThetaGradient theta;
  MatrixXd A;  // symmetrized
  MatrixXd B;
};

/// ∇ of (n/s)·Σ_{i∈batch} ψᵢ with respect to ζ (θ and A) and B.
MinimaxGradient grad_psi(const FeatureMap& map, const AugmentedState& zeta, const DualVariable& B,
                         const IndexBatch& batch, double mu, const Dataset& data);

/// The B-block of grad_psi alone; only needs features of the batch.
MatrixXd grad_psi_dual(const FeatureMap& map, const AugmentedState& zeta, const IndexBatch& batch,
                       double mu, const Dataset& data);

DualVariable proj_omega2(const DualVariable& B);

AugmentedState proj_omega1(const AugmentedState& zeta, const ZetaBounds& bounds,
                           ProjectionMode mode = ProjectionMode::sequential);

/// Membership tests with the tolerances used throughout the test suites.
bool in_omega1(const AugmentedState& zeta, const ZetaBounds& bounds, double tol = 1e-10);
bool in_omega2(const DualVariable& B, double tol = 1e-12);

/// One alternating projected step: primal descent on batch1 at (ζ_t, B_t),
/// then dual ascent on batch2 at (ζ_{t+1}, B_t).
std::pair<AugmentedState, DualVariable> minimax_step(const FeatureMap& map,
                                                     const AugmentedState& zeta,
                                                     const DualVariable& B,
                                                     const IndexBatch& batch1,
                                                     const IndexBatch& batch2,
                                                     const MinimaxConfig& cfg, const Dataset& data);

/// A₀ = F(θ₀) from a full pass (or, given a batch, (n/s)·Σ_{i∈batch} F_i(θ₀)),
/// B₀ = 0. The result is projected onto Ω₁.
std::pair<AugmentedState, DualVariable> minimax_init(const FeatureMap& map, const HyperParams& theta,
                                                     const Dataset& data, const ZetaBounds& bounds,
                                                     const IndexBatch* first_batch = nullptr,
                                                     ProjectionMode mode = ProjectionMode::sequential);

// ---------------------------------------------------------------------------
// SCGD and BSGD

/// F̃₀ = F(θ₀) from a full pass, or (n/s)·Σ_{i∈batch} F_i(θ₀) given a batch.
SCGDState scgd_init(const FeatureMap& map, const HyperParams& theta, const Dataset& data,
                    const IndexBatch* first_batch = nullptr);

/// Tracking update F̃ ← (1−b)F̃ + b(n/s)Σ_{i∈S}F_i(θ_t), followed by the
/// θ-direction Σ_{i∈S}∇[g_i + ⟨F̃⁻¹, F_i⟩] evaluated with the updated F̃.
struct ScgdDirection {
  ThetaGradient direction;
  MatrixXd F_tilde;
};

ScgdDirection scgd_direction(const FeatureMap& map, const SCGDState& state,
                             const IndexBatch& batch, double b_t, const Dataset& data);

/// θ ← θ − a_t·direction; σ² clamped at σ_min²; t incremented.
SCGDState scgd_step(const FeatureMap& map, const SCGDState& state, const IndexBatch& batch,
                    double a_t, double b_t, const Dataset& data, double sigma_min = 1e-3);

/// Batch-restricted loss Σ_{i∈S} g_i + log|Σ_{i∈S} F_i|.
double bsgd_batch_loss(const FeatureMap& map, const HyperParams& theta, const IndexBatch& batch,
                       const Dataset& data);

/// ∇ of bsgd_batch_loss.
ThetaGradient bsgd_direction(const FeatureMap& map, const HyperParams& theta,
                             const IndexBatch& batch, const Dataset& data);

HyperParams bsgd_step(const FeatureMap& map, const HyperParams& theta, const IndexBatch& batch,
                      double a_t, const Dataset& data, double sigma_min = 1e-3);

/// θ − a·g with σ² clamped at σ_min².
HyperParams apply_step(const HyperParams& theta, const ThetaGradient& g, double a,
                       double sigma_min);

}  // namespace fdgp

#endif  // FDGP_OPTIM_HPP
