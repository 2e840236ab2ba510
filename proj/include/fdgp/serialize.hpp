#ifndef FDGP_SERIALIZE_HPP
#define FDGP_SERIALIZE_HPP

#include "fdgp/optim.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace fdgp {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One line per segment: "<name> <offset> <rows> <cols>".
std::string layout_descriptor(const Layout& layout);
Layout parse_layout_descriptor(const std::string& text);

/// Writes the flat α as little-endian float64 to `path` and its layout
/// descriptor to `path` + ".layout".
void write_param_snapshot(const std::filesystem::path& path, const FeatureMapParams& params);
FeatureMapParams read_param_snapshot(const std::filesystem::path& path);

std::string rng_state(const Rng& rng);
void restore_rng(Rng& rng, const std::string& state);

/// Optimizer checkpoint: a textual header terminated by an empty line,
/// followed by little-endian float64 payload (packed θ, then each matrix
/// column-major in header order).
struct Checkpoint {
  static constexpr int kVersion = 1;

  std::string kind;  // "minimax", "scgd" or "bsgd"
  std::int64_t iteration = 0;
  HyperParams theta;
  std::vector<std::pair<std::string, MatrixXd>> matrices;
  std::string rng;

  const MatrixXd& matrix(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint checkpoint_of(const SCGDState& state, const Rng& rng);
Checkpoint checkpoint_of(const AugmentedState& zeta, const DualVariable& B, std::int64_t iteration,
                         const Rng& rng);
Checkpoint checkpoint_of(const HyperParams& theta, std::int64_t iteration, const Rng& rng);

}  // namespace fdgp

#endif  // FDGP_SERIALIZE_HPP
