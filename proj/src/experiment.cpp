#include "fdgp/experiment.hpp"

#include "fdgp/predict.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace fdgp {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDivergenceNorm = 1e12;

std::string trim_copy(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim_copy(item);
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::vector<Eigen::Index> parse_widths(const std::string& v) {
  std::vector<Eigen::Index> out;
  for (double x : parse_list(v)) out.push_back(static_cast<Eigen::Index>(x));
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument("not a boolean: '" + v + "'");
}

}  // namespace

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::minimax: return "minimax";
    case OptimizerKind::scgd: return "scgd";
    case OptimizerKind::bsgd: return "bsgd";
  }
  return "?";
}

std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::identity: return "identity";
    case FeatureKind::linear: return "linear";
    case FeatureKind::mlp: return "mlp";
    case FeatureKind::mlp_rff: return "mlp+rff";
  }
  return "?";
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "minimax") return OptimizerKind::minimax;
  if (s == "scgd") return OptimizerKind::scgd;
  if (s == "bsgd") return OptimizerKind::bsgd;
  throw std::invalid_argument("unknown optimizer '" + s + "' (minimax, scgd, bsgd)");
}

FeatureKind parse_feature_kind(const std::string& s) {
  if (s == "identity") return FeatureKind::identity;
  if (s == "linear") return FeatureKind::linear;
  if (s == "mlp") return FeatureKind::mlp;
  if (s == "mlp+rff" || s == "mlp_rff" || s == "rff") return FeatureKind::mlp_rff;
  throw std::invalid_argument("unknown feature map '" + s + "' (identity, linear, mlp, mlp+rff)");
}

FeatureMapPtr build_feature_map(const FeatureSpec& spec, Eigen::Index input_dim) {
  switch (spec.kind) {
    case FeatureKind::identity:
      return std::make_shared<IdentityMap>(input_dim);
    case FeatureKind::linear:
      return make_linear_map(input_dim, spec.dim, false);
    case FeatureKind::mlp:
      return std::make_shared<MLPMap>(MLPSpec{input_dim, spec.widths, true, true});
    case FeatureKind::mlp_rff: {
      auto mlp = std::make_shared<MLPMap>(MLPSpec{input_dim, spec.widths, true, true});
      auto rff = std::make_shared<RFFMap>(rff_init(mlp->output_dim(), spec.rff_dim,
                                                   spec.rff_length_scale, spec.rff_magnitude,
                                                   spec.rff_seed));
      return compose(rff, mlp);
    }
  }
  throw std::invalid_argument("unknown feature kind");
}

// ---------------------------------------------------------------------------
// Synthetic data

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 1) throw std::invalid_argument("gen_synthetic: n must be positive");
  if (spec.p < 1) throw std::invalid_argument("gen_synthetic: p must be positive");
  if (!(spec.sigma2 > 0.0)) throw std::invalid_argument("gen_synthetic: sigma2 must be positive");
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticData out;
  out.data.X.resize(spec.n, spec.p);
  for (Eigen::Index i = 0; i < spec.n; ++i)
    for (Eigen::Index j = 0; j < spec.p; ++j) out.data.X(i, j) = normal(rng);
  for (Eigen::Index j = 0; j < spec.p; ++j) out.data.names.push_back("x" + std::to_string(j));

  const FeatureMapPtr map = build_feature_map(spec.features, spec.p);
  out.true_alpha = map->init_params(rng);
  out.true_sigma2 = spec.sigma2;
  const MatrixXd Z = map->features(out.true_alpha, out.data.X);

  Rng noise_rng(spec.noise_seed.value_or(0));
  Rng& draw = spec.noise_seed ? noise_rng : rng;
  std::normal_distribution<double> fresh(0.0, 1.0);  // no cached deviate from the input draw
  auto& noise = spec.noise_seed ? fresh : normal;
  VectorXd eps(spec.n);
  if (spec.n <= spec.covariance_route_max_n) {
    for (Eigen::Index i = 0; i < spec.n; ++i) eps(i) = noise(draw);
    MatrixXd C = Z * Z.transpose();
    C.diagonal().array() += spec.sigma2;
    const SpdFactor L(C);
    out.data.y = L.llt().matrixL() * eps;
  } else {
    VectorXd w(Z.cols());
    for (Eigen::Index j = 0; j < w.size(); ++j) w(j) = noise(draw);
    for (Eigen::Index i = 0; i < spec.n; ++i) eps(i) = noise(draw);
    out.data.y = Z * w + std::sqrt(spec.sigma2) * eps;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("config: epochs must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("config: batch size must be at least 1");
  if (grid.empty()) throw std::invalid_argument("config: learning-rate grid is empty");
  for (double r : grid)
    if (!(r > 0.0)) throw std::invalid_argument("config: learning rates must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("config: learning rate must be positive");
  if (!(b_t > 0.0 && b_t <= 1.0)) throw std::invalid_argument("config: b_t must lie in (0, 1]");
  if (!(mu > 0.0)) throw std::invalid_argument("config: mu must be positive");
  if (!(sigma_min > 0.0)) throw std::invalid_argument("config: sigma_min must be positive");
  if (!(zeta_max > 0.0)) throw std::invalid_argument("config: zeta_max must be positive");
  if (!(init_sigma2 > 0.0)) throw std::invalid_argument("config: init_sigma2 must be positive");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw std::invalid_argument("config: train fraction must lie in (0, 1]");
  if (csv_path.empty() && !synthetic)
    throw std::invalid_argument("config: need a CSV path or a synthetic spec");
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& raw) {
  const std::string v = trim_copy(raw);
  auto synth = [&cfg]() -> SyntheticSpec& {
    if (!cfg.synthetic) cfg.synthetic.emplace();
    return *cfg.synthetic;
  };
  if (key == "csv") cfg.csv_path = v;
  else if (key == "target") cfg.target = v;
  else if (key == "dataset_name") cfg.dataset_name = v;
  else if (key == "train_fraction") cfg.train_fraction = std::stod(v);
  else if (key == "features") cfg.features.kind = parse_feature_kind(v);
  else if (key == "feature_dim") cfg.features.dim = std::stol(v);
  else if (key == "widths") cfg.features.widths = parse_widths(v);
  else if (key == "rff_dim") cfg.features.rff_dim = std::stol(v);
  else if (key == "rff_length_scale") cfg.features.rff_length_scale = std::stod(v);
  else if (key == "rff_magnitude") cfg.features.rff_magnitude = std::stod(v);
  else if (key == "rff_seed") cfg.features.rff_seed = std::stoull(v);
  else if (key == "init_sigma2") cfg.init_sigma2 = std::stod(v);
  else if (key == "optimizer") cfg.optimizer = parse_optimizer(v);
  else if (key == "batch_size") cfg.batch_size = std::stoul(v);
  else if (key == "epochs") cfg.epochs = std::stoi(v);
  else if (key == "lr" || key == "learning_rate") cfg.learning_rate = std::stod(v);
  else if (key == "grid") cfg.grid = parse_list(v);
  else if (key == "schedule") {
    if (v == "constant") cfg.schedule = Schedule::Kind::constant;
    else if (v == "polynomial") cfg.schedule = Schedule::Kind::polynomial;
    else throw std::invalid_argument("unknown schedule '" + v + "' (constant, polynomial)");
  }
  else if (key == "b_t") cfg.b_t = std::stod(v);
  else if (key == "mu") cfg.mu = std::stod(v);
  else if (key == "mu_growth") cfg.mu_growth = std::stod(v);
  else if (key == "mu_every") cfg.mu_every = std::stoi(v);
  else if (key == "dual_step") cfg.dual_step = std::stod(v);
  else if (key == "matrix_step_scale") cfg.matrix_step_scale = std::stod(v);
  else if (key == "sigma_min") cfg.sigma_min = std::stod(v);
  else if (key == "zeta_max") cfg.zeta_max = std::stod(v);
  else if (key == "shared_batch") cfg.shared_batch = parse_bool(v);
  else if (key == "without_replacement") cfg.without_replacement = parse_bool(v);
  else if (key == "streaming_init") cfg.streaming_init = parse_bool(v);
  else if (key == "step_rule") {
    if (v == "plain") cfg.step_rule = StepRule::plain;
    else if (v == "adaptive") cfg.step_rule = StepRule::adaptive;
    else throw std::invalid_argument("unknown step rule '" + v + "' (plain, adaptive)");
  }
  else if (key == "split_seed") cfg.split_seed = std::stoull(v);
  else if (key == "init_seed") cfg.init_seed = std::stoull(v);
  else if (key == "batch_seed") cfg.batch_seed = std::stoull(v);
  else if (key == "output") cfg.output = v;
  else if (key == "synth_n") synth().n = std::stol(v);
  else if (key == "synth_p") synth().p = std::stol(v);
  else if (key == "synth_sigma2") synth().sigma2 = std::stod(v);
  else if (key == "synth_features") synth().features.kind = parse_feature_kind(v);
  else if (key == "synth_dim") synth().features.dim = std::stol(v);
  else if (key == "synth_widths") synth().features.widths = parse_widths(v);
  else if (key == "synth_seed") synth().seed = std::stoull(v);
  else if (key == "synth_noise_seed") synth().noise_seed = std::stoull(v);
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim_copy(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    set_config_value(base, trim_copy(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

namespace {

json feature_spec_json(const FeatureSpec& f) {
  return {{"kind", to_string(f.kind)},
          {"dim", f.dim},
          {"widths", f.widths},
          {"rff_dim", f.rff_dim},
          {"rff_length_scale", f.rff_length_scale},
          {"rff_magnitude", f.rff_magnitude},
          {"rff_seed", f.rff_seed}};
}

FeatureSpec feature_spec_from_json(const json& j) {
  FeatureSpec f;
  f.kind = parse_feature_kind(j.at("kind").get<std::string>());
  f.dim = j.at("dim").get<Eigen::Index>();
  f.widths = j.at("widths").get<std::vector<Eigen::Index>>();
  f.rff_dim = j.at("rff_dim").get<Eigen::Index>();
  f.rff_length_scale = j.at("rff_length_scale").get<double>();
  f.rff_magnitude = j.at("rff_magnitude").get<double>();
  f.rff_seed = j.at("rff_seed").get<std::uint64_t>();
  return f;
}

// JSON has no infinity; diverged values are written as null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_or_inf(const json& j) { return j.is_null() ? kInf : j.get<double>(); }

}  // namespace

json config_to_json(const ExperimentConfig& c) {
  json j = {{"csv", c.csv_path},
            {"target", c.target},
            {"dataset_name", c.dataset_name},
            {"train_fraction", c.train_fraction},
            {"features", feature_spec_json(c.features)},
            {"init_sigma2", c.init_sigma2},
            {"optimizer", to_string(c.optimizer)},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"learning_rate", c.learning_rate},
            {"grid", c.grid},
            {"schedule", c.schedule == Schedule::Kind::constant ? "constant" : "polynomial"},
            {"b_t", c.b_t},
            {"mu", c.mu},
            {"mu_growth", c.mu_growth},
            {"mu_every", c.mu_every},
            {"dual_step", c.dual_step},
            {"matrix_step_scale", c.matrix_step_scale},
            {"sigma_min", c.sigma_min},
            {"zeta_max", c.zeta_max},
            {"shared_batch", c.shared_batch},
            {"without_replacement", c.without_replacement},
            {"streaming_init", c.streaming_init},
            {"step_rule", c.step_rule == StepRule::plain ? "plain" : "adaptive"},
            {"split_seed", c.split_seed},
            {"init_seed", c.init_seed},
            {"batch_seed", c.batch_seed},
            {"output", c.output}};
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    j["synthetic"] = {{"n", s.n},
                      {"p", s.p},
                      {"sigma2", s.sigma2},
                      {"features", feature_spec_json(s.features)},
                      {"seed", s.seed},
                      {"covariance_route_max_n", s.covariance_route_max_n}};
    j["synthetic"]["noise_seed"] =
        s.noise_seed ? json(*s.noise_seed) : json(nullptr);
  } else {
    j["synthetic"] = nullptr;
  }
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  c.csv_path = j.at("csv").get<std::string>();
  c.target = j.at("target").get<std::string>();
  c.dataset_name = j.at("dataset_name").get<std::string>();
  c.train_fraction = j.at("train_fraction").get<double>();
  c.features = feature_spec_from_json(j.at("features"));
  c.init_sigma2 = j.at("init_sigma2").get<double>();
  c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.grid = j.at("grid").get<std::vector<double>>();
  c.schedule = j.at("schedule").get<std::string>() == "constant" ? Schedule::Kind::constant
                                                                 : Schedule::Kind::polynomial;
  c.b_t = j.at("b_t").get<double>();
  c.mu = j.at("mu").get<double>();
  c.mu_growth = j.at("mu_growth").get<double>();
  c.mu_every = j.at("mu_every").get<int>();
  c.dual_step = j.at("dual_step").get<double>();
  c.matrix_step_scale = j.at("matrix_step_scale").get<double>();
  c.sigma_min = j.at("sigma_min").get<double>();
  c.zeta_max = j.at("zeta_max").get<double>();
  c.shared_batch = j.at("shared_batch").get<bool>();
  c.without_replacement = j.at("without_replacement").get<bool>();
  c.streaming_init = j.at("streaming_init").get<bool>();
  c.step_rule = j.at("step_rule").get<std::string>() == "plain" ? StepRule::plain : StepRule::adaptive;
  c.split_seed = j.at("split_seed").get<std::uint64_t>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  c.batch_seed = j.at("batch_seed").get<std::uint64_t>();
  c.output = j.at("output").get<std::string>();
  if (!j.at("synthetic").is_null()) {
    const json& s = j.at("synthetic");
    SyntheticSpec spec;
    spec.n = s.at("n").get<Eigen::Index>();
    spec.p = s.at("p").get<Eigen::Index>();
    spec.sigma2 = s.at("sigma2").get<double>();
    spec.features = feature_spec_from_json(s.at("features"));
    spec.seed = s.at("seed").get<std::uint64_t>();
    spec.covariance_route_max_n = s.at("covariance_route_max_n").get<Eigen::Index>();
    if (s.contains("noise_seed") && !s.at("noise_seed").is_null())
      spec.noise_seed = s.at("noise_seed").get<std::uint64_t>();
    c.synthetic = spec;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Data preparation and evaluation

PreparedData prepare_data(const ExperimentConfig& cfg) {
  Dataset raw;
  PreparedData out;
  if (!cfg.csv_path.empty()) {
    ColumnSelector sel = cfg.target;
    if (!cfg.target.empty() &&
        std::all_of(cfg.target.begin(), cfg.target.end(), [](char ch) { return std::isdigit(ch); }))
      sel = static_cast<Eigen::Index>(std::stol(cfg.target));
    raw = load_csv(cfg.csv_path, sel);
    out.name = std::filesystem::path(cfg.csv_path).stem().string();
  } else if (cfg.synthetic) {
    raw = gen_synthetic(*cfg.synthetic).data;
    out.name = "synthetic";
  } else {
    throw std::invalid_argument("prepare_data: no data source");
  }
  if (!cfg.dataset_name.empty()) out.name = cfg.dataset_name;
  raw.validate();

  Dataset train_raw, test_raw;
  if (cfg.train_fraction < 1.0) {
    std::tie(train_raw, test_raw) = split(raw, cfg.train_fraction, cfg.split_seed);
  } else {
    train_raw = raw;
  }
  std::tie(out.train, out.scaler) = standardize(train_raw);
  out.test.X = test_raw.size() > 0 ? out.scaler.transform(test_raw.X) : MatrixXd(0, raw.dim());
  out.test.y = test_raw.size() > 0 ? out.scaler.transform_targets(test_raw.y) : VectorXd(0);
  out.test.names = raw.names;
  return out;
}

double evaluate_nll(const FeatureMap& map, const FeatureMapParams& alpha, double sigma2,
                    const Dataset& train, std::string* method) {
  const Eigen::Index n = train.size();
  double raw = 0.0;
  if (map.output_dim() > n && n <= 2000) {
    raw = exact_nll_oracle(map, alpha, sigma2, train);
    if (method) *method = "kernel";
  } else {
    raw = profile_loss(map, alpha, sigma2, train);
    if (method) *method = "feature";
  }
  return normalized_nll(raw, n);
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

/// RMS-normalized per-coordinate steps for the optional adaptive rule.
class AdaptiveScaler {
 public:
  VectorXd scale(const VectorXd& g) {
    if (v_.size() != g.size()) v_ = VectorXd::Zero(g.size());
    v_ = kRho * v_ + (1.0 - kRho) * g.cwiseAbs2();
    return g.array() / (v_.array().sqrt() + kEps);
  }

 private:
  static constexpr double kRho = 0.9;
  static constexpr double kEps = 1e-8;
  VectorXd v_;
};

bool finite(const HyperParams& th) {
  return th.w.allFinite() && th.alpha.flat().allFinite() && std::isfinite(th.sigma2);
}

struct Snapshot {
  HyperParams theta;
  int epoch = 0;
  double nll = kInf;
};

}  // namespace

RunRecord run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_experiment(cfg, prepare_data(cfg));
}

RunRecord run_experiment(const ExperimentConfig& cfg, const PreparedData& prepared) {
  cfg.validate();
  const Dataset& train = prepared.train;
  const Eigen::Index n = train.size();
  const FeatureMapPtr map = build_feature_map(cfg.features, train.dim());
  const Eigen::Index d = map->output_dim();

  RunRecord rec;
  rec.config = cfg;
  rec.learning_rate = cfg.learning_rate;
  if (rec.config.dataset_name.empty()) rec.config.dataset_name = prepared.name;

  Rng init_rng(cfg.init_seed);
  HyperParams theta;
  theta.w = VectorXd::Zero(d);
  theta.alpha = map->init_params(init_rng);
  theta.sigma2 = cfg.init_sigma2;

  Rng batch_rng(cfg.batch_seed);
  std::optional<EpochSampler> sampler;
  if (cfg.without_replacement) sampler.emplace(n, cfg.batch_size);
  auto next_batch = [&]() {
    return sampler ? sampler->next(batch_rng) : sample_batch(n, cfg.batch_size, batch_rng);
  };

  const auto nd = static_cast<double>(n);
  const auto sd = static_cast<double>(cfg.batch_size);
  const double eta = cfg.learning_rate;
  const bool adaptive = cfg.step_rule == StepRule::adaptive;
  // Plain rates are normalized per sample: MINIMAX gradients estimate the full
  // sum over n samples, SCGD/BSGD gradients sum over the s batch samples.
  // The A-gradient scales like 1/‖A‖, so its step carries ‖A₀‖² to give A the
  // same relative speed as θ.
  const double base_a = adaptive ? eta : (cfg.optimizer == OptimizerKind::minimax ? eta / nd : eta / sd);
  Schedule schedule{cfg.schedule, base_a, cfg.b_t};

  ZetaBounds bounds;
  bounds.sigma_min = cfg.sigma_min;
  bounds.w_max = bounds.alpha_max = cfg.zeta_max;
  bounds.sigma2_max = std::max(cfg.zeta_max, cfg.sigma_min * cfg.sigma_min);
  bounds.eig_max = std::max(cfg.zeta_max * nd, bounds.sigma2_max);

  MinimaxConfig mm;
  mm.mu = cfg.mu;
  mm.b = cfg.dual_step;
  mm.bounds = bounds;

  AugmentedState zeta;
  DualVariable dual;
  double base_a_matrix = 0.0;
  SCGDState scgd;
  std::optional<IndexBatch> first;
  if (cfg.streaming_init) first = next_batch();
  if (cfg.optimizer == OptimizerKind::minimax) {
    std::tie(zeta, dual) = minimax_init(*map, theta, train, bounds, first ? &*first : nullptr);
    theta = zeta.theta;
    base_a_matrix = adaptive ? eta : eta * zeta.A.squaredNorm() * cfg.matrix_step_scale;
  } else if (cfg.optimizer == OptimizerKind::scgd) {
    scgd = scgd_init(*map, theta, train, first ? &*first : nullptr);
  }

  AdaptiveScaler adapt_theta, adapt_matrix;
  const std::int64_t iters_per_epoch =
      static_cast<std::int64_t>((n + static_cast<Eigen::Index>(cfg.batch_size) - 1) /
                                static_cast<Eigen::Index>(cfg.batch_size));
  Snapshot best;
  std::int64_t t = 0;
  double wall_ms = 0.0;

  auto mark_diverged = [&](const std::string& why) {
    rec.diverged = true;
    rec.divergence_reason = why;
  };

  for (int epoch = 1; epoch <= cfg.epochs && !rec.diverged; ++epoch) {
    if (cfg.mu_every > 0 && epoch > 1 && (epoch - 1) % cfg.mu_every == 0) mm.mu *= cfg.mu_growth;
    const auto start = std::chrono::steady_clock::now();
    try {
      for (std::int64_t it = 0; it < iters_per_epoch; ++it) {
        ++t;
        const auto [a_t, b_t] = schedule_at(schedule, t);
        const IndexBatch batch = next_batch();
        double grad_norm = 0.0;
        switch (cfg.optimizer) {
          case OptimizerKind::minimax: {
            const IndexBatch batch2 = cfg.shared_batch ? batch : next_batch();
            mm.a = a_t;
            mm.a_matrix = adaptive ? a_t : base_a_matrix * (a_t / base_a);
            if (!adaptive) {
              auto [next, next_dual] = minimax_step(*map, zeta, dual, batch, batch2, mm, train);
              grad_norm = std::sqrt((next.theta.pack() - zeta.theta.pack()).squaredNorm() / (a_t * a_t) +
                                    (next.A - zeta.A).squaredNorm() / (mm.a_matrix * mm.a_matrix));
              zeta = std::move(next);
              dual = std::move(next_dual);
            } else {
              const MinimaxGradient g = grad_psi(*map, zeta, dual, batch, mm.mu, train);
              grad_norm = std::sqrt(g.theta.pack().squaredNorm() + g.A.squaredNorm());
              AugmentedState moved = zeta;
              moved.theta.unpack(zeta.theta.pack() - a_t * adapt_theta.scale(g.theta.pack()));
              const VectorXd a_flat = Eigen::Map<const VectorXd>(g.A.data(), g.A.size());
              const VectorXd step = adapt_matrix.scale(a_flat);
              moved.A = zeta.A - a_t * Eigen::Map<const MatrixXd>(step.data(), d, d);
              zeta = proj_omega1(moved, bounds);
              const MatrixXd gB = grad_psi_dual(*map, zeta, batch2, mm.mu, train);
              dual = proj_omega2(DualVariable{dual.B + mm.b * gB});
            }
            theta = zeta.theta;
            break;
          }
          case OptimizerKind::scgd: {
            ScgdDirection dir = scgd_direction(*map, scgd, batch, b_t, train);
            grad_norm = dir.direction.norm();
            if (adaptive) {
              HyperParams next = scgd.theta;
              next.unpack(scgd.theta.pack() - a_t * adapt_theta.scale(dir.direction.pack()));
              next.sigma2 = std::max(next.sigma2, cfg.sigma_min * cfg.sigma_min);
              scgd.theta = std::move(next);
            } else {
              scgd.theta = apply_step(scgd.theta, dir.direction, a_t, cfg.sigma_min);
            }
            scgd.F_tilde = std::move(dir.F_tilde);
            ++scgd.t;
            theta = scgd.theta;
            break;
          }
          case OptimizerKind::bsgd: {
            const ThetaGradient g = bsgd_direction(*map, theta, batch, train);
            grad_norm = g.norm();
            if (adaptive) {
              HyperParams next = theta;
              next.unpack(theta.pack() - a_t * adapt_theta.scale(g.pack()));
              next.sigma2 = std::max(next.sigma2, cfg.sigma_min * cfg.sigma_min);
              theta = std::move(next);
            } else {
              theta = apply_step(theta, g, a_t, cfg.sigma_min);
            }
            break;
          }
        }
        if (!std::isfinite(grad_norm) || grad_norm > kDivergenceNorm) {
          mark_diverged("gradient norm " + std::to_string(grad_norm) + " at iteration " +
                        std::to_string(t));
          break;
        }
        if (!finite(theta)) {
          mark_diverged("non-finite parameters at iteration " + std::to_string(t));
          break;
        }
      }
    } catch (const std::exception& e) {
      mark_diverged(std::string("numerical failure: ") + e.what());
    }
    wall_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (rec.diverged) break;

    double nll = kInf;
    try {
      nll = evaluate_nll(*map, theta.alpha, theta.sigma2, train, &rec.nll_method);
    } catch (const std::exception& e) {
      mark_diverged(std::string("evaluation failure: ") + e.what());
      break;
    }
    if (!std::isfinite(nll)) {
      mark_diverged("non-finite loss at epoch " + std::to_string(epoch));
      break;
    }
    rec.epochs.push_back({epoch, nll, wall_ms});
    if (nll < best.nll) best = {theta, epoch, nll};
  }
  rec.iterations = t;

  if (best.epoch == 0) {
    rec.best_nll = kInf;
    rec.best_raw_loss = kInf;
    rec.test_rmse = rec.test_rmse_w = kInf;
    return rec;
  }
  rec.best_epoch = best.epoch;
  rec.best_nll = best.nll;
  rec.final_sigma2 = best.theta.sigma2;
  rec.best_raw_loss = profile_loss(*map, best.theta.alpha, best.theta.sigma2, train);
  if (prepared.test.size() > 0) {
    const Posterior post = posterior(*map, best.theta.alpha, best.theta.sigma2, train, prepared.test.X);
    rec.test_rmse = rmse(post.mean, prepared.test.y);
    rec.test_rmse_w =
        rmse(predict_with_weights(*map, best.theta.alpha, best.theta.w, prepared.test.X), prepared.test.y);
  } else {
    rec.test_rmse = rec.test_rmse_w = std::numeric_limits<double>::quiet_NaN();
  }
  return rec;
}

GridResult grid_search(const ExperimentConfig& cfg) {
  cfg.validate();
  return grid_search(cfg, prepare_data(cfg));
}

GridResult grid_search(const ExperimentConfig& cfg, const PreparedData& data) {
  cfg.validate();
  GridResult out;
  std::vector<double> rates = cfg.grid;
  bool found = false;
  for (double rate : rates) {
    ExperimentConfig c = cfg;
    c.learning_rate = rate;
    RunRecord r = run_experiment(c, data);
    const bool usable = std::isfinite(r.best_nll);
    if (usable) {
      const bool better = !found || r.best_nll < out.best.best_nll ||
                          (r.best_nll == out.best.best_nll && rate < out.best_rate);
      if (better) {
        out.best = r;
        out.best_rate = rate;
        found = true;
      }
    }
    out.runs.push_back(std::move(r));
  }
  if (!found) throw AllDiverged();
  return out;
}

// ---------------------------------------------------------------------------
// Reporting

json to_json(const RunRecord& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs) epochs.push_back({{"epoch", e.epoch}, {"nll", e.nll}, {"wall_ms", e.wall_ms}});
  return {{"format", "fdgp-run"},
          {"version", 1},
          {"config", config_to_json(r.config)},
          {"learning_rate", r.learning_rate},
          {"epochs", epochs},
          {"diverged", r.diverged},
          {"divergence_reason", r.divergence_reason},
          {"best_epoch", r.best_epoch},
          {"best_nll", number_or_null(r.best_nll)},
          {"best_raw_loss", number_or_null(r.best_raw_loss)},
          {"test_rmse", number_or_null(r.test_rmse)},
          {"test_rmse_w", number_or_null(r.test_rmse_w)},
          {"nll_method", r.nll_method},
          {"iterations", r.iterations},
          {"final_sigma2", r.final_sigma2}};
}

RunRecord run_record_from_json(const json& j) {
  if (j.value("format", "") != "fdgp-run") throw std::invalid_argument("not an fdgp run record");
  RunRecord r;
  r.config = config_from_json(j.at("config"));
  r.learning_rate = j.at("learning_rate").get<double>();
  for (const auto& e : j.at("epochs"))
    r.epochs.push_back({e.at("epoch").get<int>(), e.at("nll").get<double>(), e.at("wall_ms").get<double>()});
  r.diverged = j.at("diverged").get<bool>();
  r.divergence_reason = j.at("divergence_reason").get<std::string>();
  r.best_epoch = j.at("best_epoch").get<int>();
  r.best_nll = number_or_inf(j.at("best_nll"));
  r.best_raw_loss = number_or_inf(j.at("best_raw_loss"));
  r.test_rmse = number_or_inf(j.at("test_rmse"));
  r.test_rmse_w = number_or_inf(j.at("test_rmse_w"));
  r.nll_method = j.at("nll_method").get<std::string>();
  r.iterations = j.at("iterations").get<std::int64_t>();
  r.final_sigma2 = j.at("final_sigma2").get<double>();
  return r;
}

std::string epochs_csv(const RunRecord& r) {
  std::ostringstream os;
  os << "epoch,nll,wall_ms\n" << std::setprecision(17);
  for (const auto& e : r.epochs) os << e.epoch << ',' << e.nll << ',' << e.wall_ms << '\n';
  return os.str();
}

std::filesystem::path write_run(const RunRecord& r, const std::filesystem::path& dir,
                                const std::string& stem) {
  std::filesystem::create_directories(dir);
  const auto json_path = dir / (stem + ".json");
  std::ofstream(json_path) << to_json(r).dump(2) << '\n';
  std::ofstream(dir / (stem + ".csv")) << epochs_csv(r);
  return json_path;
}

ResultTable assemble_table(const std::vector<RunRecord>& runs, const std::string& metric) {
  if (metric != "nll" && metric != "rmse") throw std::invalid_argument("table metric must be nll or rmse");
  // Keyed merge: input order does not matter.
  std::map<std::pair<std::string, std::size_t>, std::map<std::string, std::vector<double>>> groups;
  std::map<std::string, int> column_set;
  for (const auto& r : runs) {
    const double v = metric == "nll" ? r.best_nll : r.test_rmse;
    const std::string col = to_string(r.config.optimizer);
    column_set[col] = 0;
    groups[{r.config.dataset_name, r.config.batch_size}][col].push_back(v);
  }
  ResultTable t;
  for (const char* col : {"minimax", "scgd", "bsgd"})
    if (column_set.count(col)) t.columns.emplace_back(col);
  for (auto& [key, cols] : groups) {
    ResultTable::Row row;
    row.dataset = key.first;
    row.batch_size = key.second;
    for (auto& [col, values] : cols) {
      std::sort(values.begin(), values.end());
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      var /= static_cast<double>(values.size());
      row.cells[col] = {mean, std::sqrt(var)};
      row.counts[col] = values.size();
    }
    t.rows.push_back(std::move(row));
  }
  std::sort(t.rows.begin(), t.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.batch_size, a.dataset) < std::tie(b.batch_size, b.dataset);
  });
  return t;
}

std::string ResultTable::to_markdown() const {
  std::ostringstream os;
  os << "| batch size | dataset |";
  for (const auto& c : columns) os << ' ' << c << " |";
  os << "\n|---|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) os << "---|";
  os << '\n' << std::fixed << std::setprecision(3);
  for (const auto& r : rows) {
    os << "| " << r.batch_size << " | " << r.dataset << " |";
    for (const auto& c : columns) {
      auto it = r.cells.find(c);
      if (it == r.cells.end()) os << "  |";
      else os << ' ' << it->second.first << " ± " << it->second.second << " |";
    }
    os << '\n';
  }
  return os.str();
}

std::string ResultTable::to_csv() const {
  std::ostringstream os;
  os << "batch_size,dataset";
  for (const auto& c : columns) os << ',' << c << "_mean," << c << "_std";
  os << '\n' << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.batch_size << ',' << r.dataset;
    for (const auto& c : columns) {
      auto it = r.cells.find(c);
      if (it == r.cells.end()) os << ",,";
      else os << ',' << it->second.first << ',' << it->second.second;
    }
    os << '\n';
  }
  return os.str();
}

std::filesystem::path default_output_dir() {
  if (const char* env = std::getenv("FDGP_OUTPUT_DIR"); env && *env) return env;
  return "results";
}

}  // namespace fdgp
