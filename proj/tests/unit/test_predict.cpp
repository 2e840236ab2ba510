#include "doctest.h"
#include "helpers.hpp"

#include "fdgp/predict.hpp"

#include <cmath>

using namespace fdgp;

TEST_SUITE("predict") {

TEST_CASE("zero training features give the prior predictive") {
  // features of the training inputs vanish, test inputs do not
  IdentityMap id(2);
  Dataset train;
  train.X = MatrixXd::Zero(5, 2);
  train.y = VectorXd::LinSpaced(5, -1.0, 1.0);
  MatrixXd test(2, 2);
  test << 1.0, 2.0, -0.5, 0.0;
  const Posterior post = posterior(id, FeatureMapParams(), 0.3, train, test);
  CHECK(post.mean.norm() == 0.0);
  CHECK(post.variance(0) == doctest::Approx(0.3 + 5.0));
  CHECK(post.variance(1) == doctest::Approx(0.3 + 0.25));
}

TEST_CASE("interpolation limit") {
  IdentityMap id(1);
  Dataset train;
  train.X = MatrixXd::Constant(1, 1, 0.7);
  train.y = VectorXd::Constant(1, -1.3);
  const Posterior post = posterior(id, FeatureMapParams(), 1e-8, train, train.X);
  CHECK(std::abs(post.mean(0) - (-1.3)) < 1e-3);
}

TEST_CASE("feature-space predictive matches the kernel-space form") {
  Rng rng(1);
  auto mlp = std::make_shared<MLPMap>(MLPSpec{3, {8, 6}, true, true});
  for (Eigen::Index n : {4, 30, 300}) {
    const Dataset train = test::random_dataset(n, 3, rng);
    const MatrixXd test_X = test::gaussian(7, 3, rng);
    const HyperParams th = test::random_theta(*mlp, rng, 0.2);
    const Posterior post = posterior(*mlp, th.alpha, th.sigma2, train, test_X);

    const MatrixXd Z = mlp->features(th.alpha, train.X);
    const MatrixXd Zs = mlp->features(th.alpha, test_X);
    const MatrixXd K = Z * Z.transpose() + th.sigma2 * MatrixXd::Identity(n, n);
    const MatrixXd Ks = Zs * Z.transpose();
    const Eigen::LDLT<MatrixXd> ldlt(K);
    const VectorXd mean = Ks * ldlt.solve(train.y);
    const VectorXd var =
        (Zs * Zs.transpose() - Ks * ldlt.solve(MatrixXd(Ks.transpose()))).diagonal().array() + th.sigma2;
    INFO("n = " << n);
    CHECK((post.mean - mean).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, mean.cwiseAbs().maxCoeff()));
    CHECK((post.variance - var).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, var.cwiseAbs().maxCoeff()));
    CHECK(post.variance.minCoeff() >= th.sigma2 - 1e-10);
  }
}

TEST_CASE("predict_with_weights") {
  Rng rng(2);
  auto lin = make_linear_map(3, 4, true);
  const HyperParams th = test::random_theta(*lin, rng);
  const MatrixXd X = test::gaussian(5, 3, rng);
  CHECK((predict_with_weights(*lin, th.alpha, th.w, X) - lin->features(th.alpha, X) * th.w).norm() <
        1e-14);
}

TEST_CASE("rmse") {
  const VectorXd y = Eigen::Vector3d(1.0, -2.0, 0.5);
  CHECK(rmse(y, y) == 0.0);
  CHECK(rmse(Eigen::Vector2d(3.0, 4.0), Eigen::Vector2d::Zero()) ==
        doctest::Approx(std::sqrt(12.5)));
  Rng rng(3);
  const VectorXd a = test::gaussian_vec(50, rng), b = test::gaussian_vec(50, rng);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < 50; ++i) sum += (a(i) - b(i)) * (a(i) - b(i));
  CHECK(rmse(a, b) == doctest::Approx(std::sqrt(sum / 50.0)).epsilon(1e-14));
  CHECK_THROWS_AS(rmse(a, y), DimensionMismatch);
  CHECK_THROWS_AS(posterior(IdentityMap(1), FeatureMapParams(), 0.0, Dataset{MatrixXd::Ones(1, 1), VectorXd::Ones(1), {}}, MatrixXd::Ones(1, 1)),
                  std::invalid_argument);
}

}  // TEST_SUITE
