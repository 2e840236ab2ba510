#include "fdgp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fdgp {

Eigen::Index failing_pivot(const MatrixXd& a) {
  const Eigen::Index n = a.rows();
  MatrixXd l = MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) return j;
    l(j, j) = std::sqrt(diag);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double v = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / l(j, j);
    }
  }
  return -1;
}

SpdFactor::SpdFactor(const MatrixXd& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("SpdFactor: matrix is not square");
  llt_.compute(a);
  bool ok = llt_.info() == Eigen::Success;
  if (ok) {
    // LLT only fails on non-positive pivots; also reject NaN/Inf that slip through.
    const auto diag = llt_.matrixLLT().diagonal();
    ok = diag.allFinite() && (diag.array() > 0.0).all();
  }
  if (!ok) {
    Eigen::Index pivot = failing_pivot(a);
    throw NotPositiveDefinite(pivot < 0 ? 0 : pivot);
  }
}

double SpdFactor::logdet() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

double SpdFactor::quad_form(const VectorXd& b) const {
  VectorXd v = llt_.matrixL().solve(b);
  return v.squaredNorm();
}

double SpdFactor::inverse_trace() const {
  // tr(F⁻¹) = ‖L⁻¹‖²_F. Column block J of L⁻¹ vanishes above row j, so each
  // block only needs the trailing triangle: d³/3 flops instead of d³.
  const Eigen::Index d = dim();
  constexpr Eigen::Index kBlock = 32;
  const auto L = llt_.matrixLLT();
  double total = 0.0;
  MatrixXd rhs;
  for (Eigen::Index j = 0; j < d; j += kBlock) {
    const Eigen::Index b = std::min(kBlock, d - j);
    const Eigen::Index m = d - j;
    rhs.setZero(m, b);
    rhs.topRows(b).setIdentity();
    L.bottomRightCorner(m, m).triangularView<Eigen::Lower>().solveInPlace(rhs);
    total += rhs.squaredNorm();
  }
  return total;
}

MatrixXd SpdFactor::inverse() const {
  MatrixXd linv = MatrixXd::Identity(dim(), dim());
  llt_.matrixL().solveInPlace(linv);
  return linv.transpose() * linv;
}

double logdet_psd(const MatrixXd& a) { return SpdFactor(a).logdet(); }

double asymmetry(const MatrixXd& m) {
  const double scale = std::max(m.norm(), std::numeric_limits<double>::min());
  return (m - m.transpose()).norm() / scale;
}

}  // namespace fdgp
