#ifndef FDGP_TEST_HELPERS_HPP
#define FDGP_TEST_HELPERS_HPP

#include "fdgp/objective.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace fdgp::test {

inline MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

inline VectorXd gaussian_vec(Eigen::Index n, Rng& rng, double scale = 1.0) {
  return gaussian(n, 1, rng, scale).col(0);
}

inline Dataset random_dataset(Eigen::Index n, Eigen::Index p, Rng& rng) {
  Dataset d;
  d.X = gaussian(n, p, rng);
  d.y = gaussian_vec(n, rng);
  return d;
}

inline HyperParams random_theta(const FeatureMap& map, Rng& rng, double sigma2 = 0.8) {
  HyperParams th;
  th.alpha = map.init_params(rng);
  // perturb so that zero-initialized biases are exercised too
  th.alpha.assign(th.alpha.flat() + gaussian_vec(th.alpha.size(), rng, 0.1));
  th.w = gaussian_vec(map.output_dim(), rng);
  th.sigma2 = sigma2;
  return th;
}

/// Central differences of f at x, step h·max(1, |x_k|).
inline VectorXd numeric_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x,
                                 double h = 1e-5) {
  VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double step = h * std::max(1.0, std::abs(x(k)));
    VectorXd xp = x, xm = x;
    xp(k) += step;
    xm(k) -= step;
    g(k) = (f(xp) - f(xm)) / (2.0 * step);
  }
  return g;
}

/// Largest coordinate-wise relative error |a − n| / max(|a|, |n|), skipping
/// coordinates where both sides are below `floor`.
inline double max_rel_error(const VectorXd& analytic, const VectorXd& numeric, double floor = 1e-8) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < analytic.size(); ++k) {
    const double scale = std::max(std::abs(analytic(k)), std::abs(numeric(k)));
    if (scale < floor) continue;
    worst = std::max(worst, std::abs(analytic(k) - numeric(k)) / scale);
  }
  return worst;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace fdgp::test

#endif  // FDGP_TEST_HELPERS_HPP
