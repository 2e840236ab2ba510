#include "fdgp/diagnostics.hpp"

#include "fdgp/experiment.hpp"

#include <cmath>

namespace fdgp {

namespace {

Dataset random_data(Eigen::Index n, Eigen::Index p, Rng& rng) {
  std::normal_distribution<double> normal;
  Dataset d;
  d.X.resize(n, p);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) d.X(i, j) = normal(rng);
    d.y(i) = normal(rng);
  }
  return d;
}

HyperParams random_theta(const FeatureMap& map, Rng& rng) {
  std::normal_distribution<double> normal;
  HyperParams th;
  th.alpha = map.init_params(rng);
  th.w.resize(map.output_dim());
  for (Eigen::Index j = 0; j < th.w.size(); ++j) th.w(j) = normal(rng);
  th.sigma2 = 0.7;
  return th;
}

double relative(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

// Central differences of the full loss against its analytic gradient.
double gradient_error(const FeatureMap& map, const HyperParams& theta, const Dataset& data) {
  const VectorXd g = full_loss_gradient(map, theta, data).pack();
  const VectorXd x = theta.pack();
  double worst = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(k)));
    HyperParams plus = theta, minus = theta;
    VectorXd xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    plus.unpack(xp);
    minus.unpack(xm);
    const double fd = (full_loss(map, plus, data) - full_loss(map, minus, data)) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - g(k)) / (1.0 + std::abs(fd)));
  }
  return worst;
}

}  // namespace

std::vector<CheckResult> run_self_checks(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CheckResult> out;
  auto record = [&out](std::string name, double err, double tol) {
    out.push_back({std::move(name), err <= tol, err, tol});
  };

  {
    const Dataset d = random_data(12, 5, rng);
    const RidgeIdentity r = ridge_identity_check(d.X, d.y, 0.3);
    record("ridge identity", relative(r.lhs, r.rhs), 1e-10);
  }

  {
    const Dataset d = random_data(30, 3, rng);
    auto map = make_linear_map(3, 6, false);
    const HyperParams th = random_theta(*map, rng);
    record("profile loss equals kernel likelihood",
           relative(profile_loss(*map, th.alpha, th.sigma2, d),
                    exact_nll_oracle(*map, th.alpha, th.sigma2, d)),
           1e-10);
  }

  {
    const Dataset d = random_data(10, 3, rng);
    const std::vector<std::pair<std::string, FeatureMapPtr>> maps = {
        {"identity", std::make_shared<IdentityMap>(3)},
        {"linear", make_linear_map(3, 4, true)},
        {"mlp", std::make_shared<MLPMap>(MLPSpec{3, {5, 4}, false, true})},
        {"mlp+rff", compose(std::make_shared<RFFMap>(rff_init(4, 6, 1.3, 0.8, seed + 11)),
                            std::make_shared<MLPMap>(MLPSpec{3, {5, 4}, false, true}))},
    };
    for (const auto& [name, map] : maps)
      record("loss gradient (" + name + ")", gradient_error(*map, random_theta(*map, rng), d), 1e-5);
  }

  {
    // Mean of the s=1 estimators over every index equals the full quantity.
    const Dataset d = random_data(7, 3, rng);
    auto map = make_linear_map(3, 3, true);
    const HyperParams th = random_theta(*map, rng);
    const Eigen::Index n = d.size();
    MatrixXd F_avg = MatrixXd::Zero(3, 3);
    double g_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      F_avg += F_i(*map, th, d.X.row(i).transpose(), n);
      g_sum += g_i(*map, th, d.X.row(i).transpose(), d.y(i), n);
    }
    const MatrixXd F = information_matrix(map->features(th.alpha, d.X), th.sigma2);
    record("information matrix decomposition", (F_avg - F).norm() / F.norm(), 1e-12);
    const double full = full_loss(*map, th, d) - logdet_psd(F);
    record("loss decomposition", relative(g_sum, full), 1e-12);

    const MatrixXd M = F.inverse();
    VectorXd sum = VectorXd::Zero(th.packed_size());
    for (Eigen::Index i = 0; i < n; ++i) {
      IndexBatch b{{i}, n};
      sum += static_cast<double>(n) * grad_theta_of_linearized(*map, th, b, M, d).pack();
    }
    const VectorXd exact = full_loss_gradient(*map, th, d).pack();
    record("linearized gradient unbiased", (sum / static_cast<double>(n) - exact).norm() / exact.norm(),
           1e-10);
  }
  return out;
}

}  // namespace fdgp
