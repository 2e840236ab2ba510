#ifndef FDGP_FEATURES_HPP
#define FDGP_FEATURES_HPP

#include "fdgp/data.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fdgp {

/// One named tensor inside a flat parameter vector, stored column-major.
struct Segment {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 1;

  Eigen::Index size() const { return rows * cols; }
};

using Layout = std::vector<Segment>;

Eigen::Index layout_size(const Layout& layout);

/// Flat learnable feature-map parameters α plus the layout that names them.
///
/// Every assignment draws a fresh stamp from a process-wide counter; a
/// FeatureBatch remembers the stamp it was computed with so that backward()
/// can refuse a cache produced under different parameter values.
class FeatureMapParams {
 public:
  FeatureMapParams();
  FeatureMapParams(VectorXd flat, Layout layout);

  const VectorXd& flat() const { return flat_; }
  const Layout& layout() const { return layout_; }
  Eigen::Index size() const { return flat_.size(); }
  std::uint64_t stamp() const { return stamp_; }

  void assign(VectorXd flat);

  /// Named tensor as a matrix copy (rows × cols).
  MatrixXd tensor(std::string_view name) const;
  void set_tensor(std::string_view name, const MatrixXd& value);

 private:
  const Segment& find(std::string_view name) const;

  VectorXd flat_;
  Layout layout_;
  std::uint64_t stamp_;
};

/// Output of a forward pass: Z (s×d) plus what backward needs.
struct FeatureBatch {
  MatrixXd Z;
  std::vector<MatrixXd> cache;
  std::vector<FeatureBatch> parts;  // sub-batches of a composed map
  std::uint64_t stamp = 0;
};

class StaleCache : public std::logic_error {
 public:
  StaleCache() : std::logic_error("feature batch was computed with different parameters") {}
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Differentiable map φ_α: ℝᵖ → ℝᵈ applied row-wise to a batch.
class FeatureMap {
 public:
  virtual ~FeatureMap() = default;

  virtual Eigen::Index input_dim() const = 0;
  virtual Eigen::Index output_dim() const = 0;
  virtual Layout layout() const = 0;
  virtual std::string describe() const = 0;

  Eigen::Index param_count() const { return layout_size(layout()); }

  /// Parameters at their seeded initial values.
  FeatureMapParams init_params(Rng& rng) const;

  /// Row i of the result is φ_α(X.row(i)).
  FeatureBatch forward(const FeatureMapParams& params, const MatrixXd& X) const;

  /// ∂/∂α of Σᵢ ⟨upstream.row(i), φ_α(xᵢ)⟩.
  VectorXd backward(const FeatureMapParams& params, const FeatureBatch& batch,
                    const MatrixXd& upstream) const;

  /// Convenience: forward(...).Z.
  MatrixXd features(const FeatureMapParams& params, const MatrixXd& X) const;

  // Unchecked building blocks, used by ComposedMap. `grad_input`, when not
  // null, receives ∂/∂X of the same scalar.
  virtual void initialize(Eigen::Ref<VectorXd> params, Rng& rng) const = 0;
  virtual FeatureBatch forward_raw(Eigen::Ref<const VectorXd> params, const MatrixXd& X) const = 0;
  virtual void backward_raw(Eigen::Ref<const VectorXd> params, const FeatureBatch& batch,
                            const MatrixXd& upstream, Eigen::Ref<VectorXd> grad,
                            MatrixXd* grad_input) const = 0;
};

using FeatureMapPtr = std::shared_ptr<const FeatureMap>;

/// φ(x) = x.
class IdentityMap final : public FeatureMap {
 public:
  explicit IdentityMap(Eigen::Index dim);

  Eigen::Index input_dim() const override { return dim_; }
  Eigen::Index output_dim() const override { return dim_; }
  Layout layout() const override { return {}; }
  std::string describe() const override;

  void initialize(Eigen::Ref<VectorXd>, Rng&) const override {}
  FeatureBatch forward_raw(Eigen::Ref<const VectorXd> params, const MatrixXd& X) const override;
  void backward_raw(Eigen::Ref<const VectorXd> params, const FeatureBatch& batch,
                    const MatrixXd& upstream, Eigen::Ref<VectorXd> grad,
                    MatrixXd* grad_input) const override;

 private:
  Eigen::Index dim_;
};

/// Fully connected stack. Layer k maps widths[k-1] → widths[k]; ReLU follows
/// every layer except possibly the last.
struct MLPSpec {
  Eigen::Index input_dim = 0;
  std::vector<Eigen::Index> widths{128, 128};
  bool relu_on_output = true;
  bool bias = true;
};

class MLPMap final : public FeatureMap {
 public:
  explicit MLPMap(MLPSpec spec);

  Eigen::Index input_dim() const override { return spec_.input_dim; }
  Eigen::Index output_dim() const override { return spec_.widths.back(); }
  Layout layout() const override;
  std::string describe() const override;
  const MLPSpec& spec() const { return spec_; }

  void initialize(Eigen::Ref<VectorXd> params, Rng& rng) const override;
  FeatureBatch forward_raw(Eigen::Ref<const VectorXd> params, const MatrixXd& X) const override;
  void backward_raw(Eigen::Ref<const VectorXd> params, const FeatureBatch& batch,
                    const MatrixXd& upstream, Eigen::Ref<VectorXd> grad,
                    MatrixXd* grad_input) const override;

 private:
  bool relu_after(std::size_t layer) const;

  MLPSpec spec_;
  Layout layout_;
};

/// φ(x) = Wx (+ b): a single dense layer without activation.
std::shared_ptr<MLPMap> make_linear_map(Eigen::Index in, Eigen::Index out, bool bias);

/// Random Fourier features for u₂·exp(−‖z−z′‖²/(2u₁²)).
///
/// Frequencies and phases are drawn once. Frequencies are stored at unit
/// scale and divided by u₁ at evaluation, so u₁ stays differentiable.
struct RFFParams {
  MatrixXd unit_frequencies;  // D×q, rows ~ N(0, I)
  VectorXd phases;            // D, uniform on [0, 2π)
  double u1 = 1.0;            // length scale
  double u2 = 1.0;            // magnitude

  Eigen::Index features() const { return unit_frequencies.rows(); }
  Eigen::Index input_dim() const { return unit_frequencies.cols(); }
  MatrixXd frequencies() const { return unit_frequencies / u1; }
  double amplitude() const;
};

RFFParams rff_init(Eigen::Index q, Eigen::Index D, double u1, double u2, std::uint64_t seed);

/// φ(z)_j = √(2u₂/D)·cos(ω_jᵀz/u₁ + β_j) with learnable (log u₁, log u₂).
class RFFMap final : public FeatureMap {
 public:
  explicit RFFMap(RFFParams params);

  Eigen::Index input_dim() const override { return rff_.input_dim(); }
  Eigen::Index output_dim() const override { return rff_.features(); }
  Layout layout() const override;
  std::string describe() const override;
  const RFFParams& rff() const { return rff_; }

  /// Learnable values for given (u₁, u₂).
  static VectorXd log_params(double u1, double u2);

  void initialize(Eigen::Ref<VectorXd> params, Rng& rng) const override;
  FeatureBatch forward_raw(Eigen::Ref<const VectorXd> params, const MatrixXd& X) const override;
  void backward_raw(Eigen::Ref<const VectorXd> params, const FeatureBatch& batch,
                    const MatrixXd& upstream, Eigen::Ref<VectorXd> grad,
                    MatrixXd* grad_input) const override;

 private:
  RFFParams rff_;
};

/// outer ∘ inner. Parameters are (inner, outer) concatenated.
class ComposedMap final : public FeatureMap {
 public:
  ComposedMap(FeatureMapPtr outer, FeatureMapPtr inner);

  Eigen::Index input_dim() const override { return inner_->input_dim(); }
  Eigen::Index output_dim() const override { return outer_->output_dim(); }
  Layout layout() const override;
  std::string describe() const override;

  void initialize(Eigen::Ref<VectorXd> params, Rng& rng) const override;
  FeatureBatch forward_raw(Eigen::Ref<const VectorXd> params, const MatrixXd& X) const override;
  void backward_raw(Eigen::Ref<const VectorXd> params, const FeatureBatch& batch,
                    const MatrixXd& upstream, Eigen::Ref<VectorXd> grad,
                    MatrixXd* grad_input) const override;

 private:
  FeatureMapPtr outer_;
  FeatureMapPtr inner_;
  Eigen::Index inner_params_;
};

FeatureMapPtr compose(FeatureMapPtr outer, FeatureMapPtr inner);

}  // namespace fdgp

#endif  // FDGP_FEATURES_HPP
