#ifndef FDGP_LINALG_HPP
#define FDGP_LINALG_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace fdgp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Raised when a symmetric factorization meets a non-positive pivot.
class NotPositiveDefinite : public std::runtime_error {
 public:
  explicit NotPositiveDefinite(Eigen::Index pivot, const std::string& where = "")
      : std::runtime_error("matrix is not positive definite (failing pivot " +
                           std::to_string(pivot) + ")" +
                           (where.empty() ? "" : " in " + where)),
        pivot_(pivot) {}

  Eigen::Index pivot() const noexcept { return pivot_; }

 private:
  Eigen::Index pivot_;
};

/// Cholesky factor of a symmetric positive definite matrix.
///
/// Only the lower triangle of the input is read. Construction throws
/// NotPositiveDefinite carrying the index of the first pivot that failed.
class SpdFactor {
 public:
  SpdFactor() = default;
  explicit SpdFactor(const MatrixXd& a);

  Eigen::Index dim() const { return llt_.rows(); }

  /// log|A| as twice the sum of log pivots.
  double logdet() const;

  MatrixXd solve(const MatrixXd& rhs) const { return llt_.solve(rhs); }
  VectorXd solve(const VectorXd& rhs) const { return llt_.solve(rhs); }

  /// bᵀA⁻¹b.
  double quad_form(const VectorXd& b) const;

  /// trace(A⁻¹) = ‖L⁻¹‖²_F, via one triangular solve against the identity.
  double inverse_trace() const;

  /// A⁻¹ assembled from L⁻¹. Used where the full matrix is the output.
  MatrixXd inverse() const;

  const Eigen::LLT<MatrixXd>& llt() const { return llt_; }

 private:
  Eigen::LLT<MatrixXd> llt_;
};

/// log|A| for symmetric positive definite A.
double logdet_psd(const MatrixXd& a);

/// Index of the first pivot at which an unblocked Cholesky of `a` fails, or -1.
Eigen::Index failing_pivot(const MatrixXd& a);

inline MatrixXd symmetrize(const MatrixXd& g) { return 0.5 * (g + g.transpose()); }

/// Frobenius inner product ⟨A, B⟩ = tr(ABᵀ).
inline double frobenius_dot(const MatrixXd& a, const MatrixXd& b) {
  return a.cwiseProduct(b).sum();
}

/// Relative asymmetry ‖M − Mᵀ‖ / max(‖M‖, tiny).
double asymmetry(const MatrixXd& m);

}  // namespace fdgp

#endif  // FDGP_LINALG_HPP
