#ifndef FDGP_DIAGNOSTICS_HPP
#define FDGP_DIAGNOSTICS_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace fdgp {

struct CheckResult {
  std::string name;
  bool passed = false;
  double error = 0.0;      // measured discrepancy
  double tolerance = 0.0;  // threshold it was held to
};

/// Self-checks on small random problems: the ridge identity, profile vs kernel
/// likelihood, analytic vs finite-difference gradients for each feature map,
/// and unbiasedness of the stochastic estimators by exhaustive enumeration.
std::vector<CheckResult> run_self_checks(std::uint64_t seed = 0);

}  // namespace fdgp

#endif  // FDGP_DIAGNOSTICS_HPP
