#include "fdgp/features.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>

namespace fdgp {

namespace {

std::uint64_t next_stamp() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

void check_input(const FeatureMap& map, const MatrixXd& X) {
  if (X.cols() != map.input_dim())
    throw DimensionMismatch(map.describe() + ": input has " + std::to_string(X.cols()) +
                            " columns, expected " + std::to_string(map.input_dim()));
}

void check_params(const FeatureMap& map, const FeatureMapParams& params) {
  if (params.size() != map.param_count())
    throw DimensionMismatch(map.describe() + ": parameter vector has " +
                            std::to_string(params.size()) + " entries, expected " +
                            std::to_string(map.param_count()));
}

}  // namespace

Eigen::Index layout_size(const Layout& layout) {
  Eigen::Index total = 0;
  for (const auto& seg : layout) total += seg.size();
  return total;
}

// ---------------------------------------------------------------------------
// FeatureMapParams

FeatureMapParams::FeatureMapParams() : stamp_(next_stamp()) {}

FeatureMapParams::FeatureMapParams(VectorXd flat, Layout layout)
    : flat_(std::move(flat)), layout_(std::move(layout)), stamp_(next_stamp()) {
  if (layout_size(layout_) != flat_.size())
    throw DimensionMismatch("parameter layout covers " + std::to_string(layout_size(layout_)) +
                            " entries but vector has " + std::to_string(flat_.size()));
}

void FeatureMapParams::assign(VectorXd flat) {
  if (flat.size() != flat_.size())
    throw DimensionMismatch("assign: expected " + std::to_string(flat_.size()) + " parameters");
  flat_ = std::move(flat);
  stamp_ = next_stamp();
}

const Segment& FeatureMapParams::find(std::string_view name) const {
  for (const auto& seg : layout_)
    if (seg.name == name) return seg;
  throw std::out_of_range("no parameter segment named '" + std::string(name) + "'");
}

MatrixXd FeatureMapParams::tensor(std::string_view name) const {
  const Segment& seg = find(name);
  return Eigen::Map<const MatrixXd>(flat_.data() + seg.offset, seg.rows, seg.cols);
}

void FeatureMapParams::set_tensor(std::string_view name, const MatrixXd& value) {
  const Segment& seg = find(name);
  if (value.rows() != seg.rows || value.cols() != seg.cols)
    throw DimensionMismatch("set_tensor: shape mismatch for '" + seg.name + "'");
  Eigen::Map<MatrixXd>(flat_.data() + seg.offset, seg.rows, seg.cols) = value;
  stamp_ = next_stamp();
}

// ---------------------------------------------------------------------------
// FeatureMap

FeatureMapParams FeatureMap::init_params(Rng& rng) const {
  VectorXd flat = VectorXd::Zero(param_count());
  initialize(flat, rng);
  return FeatureMapParams(std::move(flat), layout());
}

FeatureBatch FeatureMap::forward(const FeatureMapParams& params, const MatrixXd& X) const {
  check_params(*this, params);
  check_input(*this, X);
  FeatureBatch batch = forward_raw(params.flat(), X);
  batch.stamp = params.stamp();
  return batch;
}

VectorXd FeatureMap::backward(const FeatureMapParams& params, const FeatureBatch& batch,
                              const MatrixXd& upstream) const {
  check_params(*this, params);
  if (batch.stamp != params.stamp()) throw StaleCache();
  if (upstream.rows() != batch.Z.rows() || upstream.cols() != batch.Z.cols())
    throw DimensionMismatch(describe() + ": upstream gradient shape does not match features");
  VectorXd grad = VectorXd::Zero(param_count());
  backward_raw(params.flat(), batch, upstream, grad, nullptr);
  return grad;
}

MatrixXd FeatureMap::features(const FeatureMapParams& params, const MatrixXd& X) const {
  return forward(params, X).Z;
}

// ---------------------------------------------------------------------------
// IdentityMap

IdentityMap::IdentityMap(Eigen::Index dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("IdentityMap: dimension must be positive");
}

std::string IdentityMap::describe() const { return "identity(" + std::to_string(dim_) + ")"; }

FeatureBatch IdentityMap::forward_raw(Eigen::Ref<const VectorXd>, const MatrixXd& X) const {
  FeatureBatch b;
  b.Z = X;
  return b;
}

void IdentityMap::backward_raw(Eigen::Ref<const VectorXd>, const FeatureBatch&,
                               const MatrixXd& upstream, Eigen::Ref<VectorXd>,
                               MatrixXd* grad_input) const {
  if (grad_input) *grad_input = upstream;
}

// ---------------------------------------------------------------------------
// MLPMap
//
// Flat layout, per layer k: "layer<k>.weight" (out×in, column-major) then
// "layer<k>.bias" (out) when biases are enabled.
// Cache, per layer: layer input, then pre-activation.

MLPMap::MLPMap(MLPSpec spec) : spec_(std::move(spec)) {
  if (spec_.input_dim < 1) throw std::invalid_argument("MLPMap: input dimension must be positive");
  if (spec_.widths.empty()) throw std::invalid_argument("MLPMap: at least one layer required");
  Eigen::Index in = spec_.input_dim;
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < spec_.widths.size(); ++k) {
    const Eigen::Index out = spec_.widths[k];
    if (out < 1) throw std::invalid_argument("MLPMap: layer widths must be positive");
    const std::string prefix = "layer" + std::to_string(k);
    layout_.push_back({prefix + ".weight", offset, out, in});
    offset += out * in;
    if (spec_.bias) {
      layout_.push_back({prefix + ".bias", offset, out, 1});
      offset += out;
    }
    in = out;
  }
}

Layout MLPMap::layout() const { return layout_; }

std::string MLPMap::describe() const {
  std::ostringstream os;
  os << "mlp(" << spec_.input_dim;
  for (auto w : spec_.widths) os << "->" << w;
  os << (spec_.relu_on_output ? ", relu out" : ", linear out") << ')';
  return os.str();
}

bool MLPMap::relu_after(std::size_t layer) const {
  return layer + 1 < spec_.widths.size() || spec_.relu_on_output;
}

void MLPMap::initialize(Eigen::Ref<VectorXd> params, Rng& rng) const {
  // He-style uniform: U(−√(6/fan_in), √(6/fan_in)); biases start at zero.
  const std::size_t per_layer = spec_.bias ? 2 : 1;
  for (std::size_t k = 0; k < spec_.widths.size(); ++k) {
    const Segment& w = layout_[k * per_layer];
    const double limit = std::sqrt(6.0 / static_cast<double>(w.cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < w.size(); ++i) params(w.offset + i) = u(rng);
    if (spec_.bias) {
      const Segment& b = layout_[k * per_layer + 1];
      params.segment(b.offset, b.size()).setZero();
    }
  }
}

FeatureBatch MLPMap::forward_raw(Eigen::Ref<const VectorXd> params, const MatrixXd& X) const {
  FeatureBatch batch;
  const std::size_t per_layer = spec_.bias ? 2 : 1;
  MatrixXd h = X;
  for (std::size_t k = 0; k < spec_.widths.size(); ++k) {
    const Segment& ws = layout_[k * per_layer];
    Eigen::Map<const MatrixXd> W(params.data() + ws.offset, ws.rows, ws.cols);
    MatrixXd pre = h * W.transpose();
    if (spec_.bias) {
      const Segment& bs = layout_[k * per_layer + 1];
      pre.rowwise() += params.segment(bs.offset, bs.size()).transpose();
    }
    batch.cache.push_back(std::move(h));
    h = relu_after(k) ? MatrixXd(pre.cwiseMax(0.0)) : pre;
    batch.cache.push_back(std::move(pre));
  }
  batch.Z = std::move(h);
  return batch;
}

void MLPMap::backward_raw(Eigen::Ref<const VectorXd> params, const FeatureBatch& batch,
                          const MatrixXd& upstream, Eigen::Ref<VectorXd> grad,
                          MatrixXd* grad_input) const {
  const std::size_t per_layer = spec_.bias ? 2 : 1;
  MatrixXd g = upstream;
  for (std::size_t k = spec_.widths.size(); k-- > 0;) {
    const MatrixXd& input = batch.cache[2 * k];
    const MatrixXd& pre = batch.cache[2 * k + 1];
    if (relu_after(k)) g = (pre.array() > 0.0).select(g, 0.0);
    const Segment& ws = layout_[k * per_layer];
    Eigen::Map<MatrixXd>(grad.data() + ws.offset, ws.rows, ws.cols) += g.transpose() * input;
    if (spec_.bias) {
      const Segment& bs = layout_[k * per_layer + 1];
      grad.segment(bs.offset, bs.size()) += g.colwise().sum().transpose();
    }
    if (k > 0 || grad_input) {
      Eigen::Map<const MatrixXd> W(params.data() + ws.offset, ws.rows, ws.cols);
      g = g * W;
    }
  }
  if (grad_input) *grad_input = std::move(g);
}

std::shared_ptr<MLPMap> make_linear_map(Eigen::Index in, Eigen::Index out, bool bias) {
  return std::make_shared<MLPMap>(MLPSpec{in, {out}, false, bias});
}

// ---------------------------------------------------------------------------
// Random Fourier features
//
// Learnable layout: "log_length_scale" then "log_magnitude".
// Cache: input, cosine argument T = Z Ωᵀ/u₁ + β.

double RFFParams::amplitude() const {
  return std::sqrt(2.0 * u2 / static_cast<double>(features()));
}

RFFParams rff_init(Eigen::Index q, Eigen::Index D, double u1, double u2, std::uint64_t seed) {
  if (q < 1 || D < 1) throw std::invalid_argument("rff_init: dimensions must be positive");
  if (!(u1 > 0.0) || !(u2 > 0.0))
    throw std::invalid_argument("rff_init: length scale and magnitude must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  RFFParams p;
  p.unit_frequencies.resize(D, q);
  for (Eigen::Index j = 0; j < D; ++j)
    for (Eigen::Index c = 0; c < q; ++c) p.unit_frequencies(j, c) = normal(rng);
  p.phases.resize(D);
  for (Eigen::Index j = 0; j < D; ++j) p.phases(j) = phase(rng);
  p.u1 = u1;
  p.u2 = u2;
  return p;
}

RFFMap::RFFMap(RFFParams params) : rff_(std::move(params)) {
  if (rff_.features() < 1 || rff_.input_dim() < 1)
    throw std::invalid_argument("RFFMap: empty frequency matrix");
  if (rff_.phases.size() != rff_.features())
    throw DimensionMismatch("RFFMap: phase count does not match feature count");
}

Layout RFFMap::layout() const { return {{"log_length_scale", 0, 1, 1}, {"log_magnitude", 1, 1, 1}}; }

std::string RFFMap::describe() const {
  return "rff(" + std::to_string(rff_.input_dim()) + "->" + std::to_string(rff_.features()) + ")";
}

VectorXd RFFMap::log_params(double u1, double u2) {
  if (!(u1 > 0.0) || !(u2 > 0.0))
    throw std::invalid_argument("RFFMap: length scale and magnitude must be positive");
  return VectorXd{{std::log(u1), std::log(u2)}};
}

void RFFMap::initialize(Eigen::Ref<VectorXd> params, Rng&) const {
  params = log_params(rff_.u1, rff_.u2);
}

FeatureBatch RFFMap::forward_raw(Eigen::Ref<const VectorXd> params, const MatrixXd& X) const {
  const double u1 = std::exp(params(0));
  const double u2 = std::exp(params(1));
  const double amp = std::sqrt(2.0 * u2 / static_cast<double>(rff_.features()));
  FeatureBatch batch;
  MatrixXd T = (X * rff_.unit_frequencies.transpose()) / u1;
  T.rowwise() += rff_.phases.transpose();
  batch.Z = amp * T.array().cos().matrix();
  batch.cache.push_back(X);
  batch.cache.push_back(std::move(T));
  return batch;
}

void RFFMap::backward_raw(Eigen::Ref<const VectorXd> params, const FeatureBatch& batch,
                          const MatrixXd& upstream, Eigen::Ref<VectorXd> grad,
                          MatrixXd* grad_input) const {
  const double u1 = std::exp(params(0));
  const double u2 = std::exp(params(1));
  const double amp = std::sqrt(2.0 * u2 / static_cast<double>(rff_.features()));
  const MatrixXd& T = batch.cache[1];
  // ∂L/∂T
  const Eigen::ArrayXXd dT = -amp * upstream.array() * T.array().sin();
  // T − β = Z Ωᵀ/u₁ scales as 1/u₁, so ∂T/∂log u₁ = −(T − β).
  MatrixXd scaled = T;
  scaled.rowwise() -= rff_.phases.transpose();
  grad(0) += -(dT * scaled.array()).sum();
  // φ ∝ √u₂, so ∂φ/∂log u₂ = φ/2.
  grad(1) += 0.5 * (upstream.array() * batch.Z.array()).sum();
  if (grad_input) *grad_input = (dT.matrix() * rff_.unit_frequencies) / u1;
}

// ---------------------------------------------------------------------------
// ComposedMap

ComposedMap::ComposedMap(FeatureMapPtr outer, FeatureMapPtr inner)
    : outer_(std::move(outer)), inner_(std::move(inner)) {
  if (!outer_ || !inner_) throw std::invalid_argument("compose: null feature map");
  if (inner_->output_dim() != outer_->input_dim())
    throw DimensionMismatch("compose: inner output dimension " +
                            std::to_string(inner_->output_dim()) + " differs from outer input " +
                            std::to_string(outer_->input_dim()));
  inner_params_ = inner_->param_count();
}

Layout ComposedMap::layout() const {
  Layout out;
  for (auto seg : inner_->layout()) {
    seg.name = "inner." + seg.name;
    out.push_back(seg);
  }
  for (auto seg : outer_->layout()) {
    seg.name = "outer." + seg.name;
    seg.offset += inner_params_;
    out.push_back(seg);
  }
  return out;
}

std::string ComposedMap::describe() const { return outer_->describe() + " o " + inner_->describe(); }

void ComposedMap::initialize(Eigen::Ref<VectorXd> params, Rng& rng) const {
  inner_->initialize(params.head(inner_params_), rng);
  outer_->initialize(params.tail(params.size() - inner_params_), rng);
}

FeatureBatch ComposedMap::forward_raw(Eigen::Ref<const VectorXd> params, const MatrixXd& X) const {
  FeatureBatch batch;
  batch.parts.push_back(inner_->forward_raw(params.head(inner_params_), X));
  batch.parts.push_back(
      outer_->forward_raw(params.tail(params.size() - inner_params_), batch.parts[0].Z));
  batch.Z = batch.parts[1].Z;
  return batch;
}

void ComposedMap::backward_raw(Eigen::Ref<const VectorXd> params, const FeatureBatch& batch,
                               const MatrixXd& upstream, Eigen::Ref<VectorXd> grad,
                               MatrixXd* grad_input) const {
  const Eigen::Index outer_count = params.size() - inner_params_;
  MatrixXd mid;
  outer_->backward_raw(params.tail(outer_count), batch.parts[1], upstream, grad.tail(outer_count),
                       &mid);
  inner_->backward_raw(params.head(inner_params_), batch.parts[0], mid, grad.head(inner_params_),
                       grad_input);
}

FeatureMapPtr compose(FeatureMapPtr outer, FeatureMapPtr inner) {
  return std::make_shared<ComposedMap>(std::move(outer), std::move(inner));
}

}  // namespace fdgp
