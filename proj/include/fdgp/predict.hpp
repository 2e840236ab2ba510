#ifndef FDGP_PREDICT_HPP
#define FDGP_PREDICT_HPP

#include "fdgp/objective.hpp"

namespace fdgp {

/// Predictive mean and variance (noise included) at t test points.
struct Posterior {
  VectorXd mean;
  VectorXd variance;
};

/// Feature-space GP predictive with w marginalized:
///   mean = z*ᵀ(ZᵀZ + σ²I)⁻¹Zᵀy,  variance = σ²(1 + z*ᵀ(ZᵀZ + σ²I)⁻¹z*).
Posterior posterior(const FeatureMap& map, const FeatureMapParams& alpha, double sigma2,
                    const Dataset& train, const MatrixXd& test_X);

/// Mean z*ᵀw using a fixed weight vector instead of the marginalized one.
VectorXd predict_with_weights(const FeatureMap& map, const FeatureMapParams& alpha,
                              const VectorXd& w, const MatrixXd& test_X);

double rmse(const VectorXd& pred, const VectorXd& y);

}  // namespace fdgp

#endif  // FDGP_PREDICT_HPP
