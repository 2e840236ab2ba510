#ifndef FDGP_EXPERIMENT_HPP
#define FDGP_EXPERIMENT_HPP

#include "fdgp/optim.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fdgp {

enum class OptimizerKind { minimax, scgd, bsgd };
enum class FeatureKind { identity, linear, mlp, mlp_rff };

std::string to_string(OptimizerKind k);
std::string to_string(FeatureKind k);
OptimizerKind parse_optimizer(const std::string& s);
FeatureKind parse_feature_kind(const std::string& s);

/// Feature architecture. `linear`: φ(x) = Wx with W d×p. `mlp`: dense ReLU
/// stack with the given widths (last width = d). `mlp_rff`: random Fourier
/// features of dimension rff_dim on top of the MLP.
struct FeatureSpec {
  FeatureKind kind = FeatureKind::linear;
  Eigen::Index dim = 16;                       // d for identity/linear
  std::vector<Eigen::Index> widths{128, 128};  // mlp / mlp_rff
  Eigen::Index rff_dim = 1000;
  double rff_length_scale = 1.0;
  double rff_magnitude = 1.0;
  std::uint64_t rff_seed = 7;
};

FeatureMapPtr build_feature_map(const FeatureSpec& spec, Eigen::Index input_dim);

/// GP data y ~ N(0, ZZᵀ + σ²I) with Z from a randomly initialized map.
struct SyntheticSpec {
  Eigen::Index n = 512;
  Eigen::Index p = 8;
  double sigma2 = 0.1;
  FeatureSpec features{FeatureKind::linear, 8};
  std::uint64_t seed = 0;
  /// When set, targets come from a separate generator with this seed, so
  /// inputs and features stay fixed while the noise draw varies.
  std::optional<std::uint64_t> noise_seed;
  /// Draw through the n×n covariance factorization when n ≤ this, otherwise
  /// as y = Zw + σε with w ~ N(0, I) (same distribution, O(nd)).
  Eigen::Index covariance_route_max_n = 4096;
};

struct SyntheticData {
  Dataset data;
  FeatureMapParams true_alpha;
  double true_sigma2 = 0.0;
};

SyntheticData gen_synthetic(const SyntheticSpec& spec);

enum class StepRule {
  /// θ ← θ − a·g with the configured schedule.
  plain,
  /// Per-coordinate RMS normalization of the plain step (optional, not part
  /// of the MINIMAX/SCGD update rules themselves).
  adaptive,
};

struct ExperimentConfig {
  // data
  std::string csv_path;  // empty: synthetic
  std::string target = "y";
  std::optional<SyntheticSpec> synthetic;
  std::string dataset_name;
  double train_fraction = 0.9;

  // model
  FeatureSpec features;
  double init_sigma2 = 1.0;

  // optimization
  OptimizerKind optimizer = OptimizerKind::scgd;
  std::size_t batch_size = 32;
  int epochs = 100;
  double learning_rate = 1e-2;  // per-sample normalized rate η
  std::vector<double> grid{1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
  Schedule::Kind schedule = Schedule::Kind::constant;
  double b_t = 0.9;
  double mu = 1.0;
  double mu_growth = 1.0;  // μ multiplied by this every mu_every epochs
  int mu_every = 0;        // 0 disables the outer penalty loop
  double dual_step = 0.5;
  double matrix_step_scale = 1.0;
  double sigma_min = 1e-3;
  double zeta_max = 1e6;
  bool shared_batch = false;
  bool without_replacement = false;
  bool streaming_init = false;
  StepRule step_rule = StepRule::plain;

  // seeds
  std::uint64_t split_seed = 0;
  std::uint64_t init_seed = 1;
  std::uint64_t batch_seed = 2;

  std::string output;  // directory for JSON/CSV; empty: no files

  void validate() const;
};

/// Key-value text form: one "key = value" per line, '#' comments.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
/// Applies one key/value pair; throws std::invalid_argument on unknown keys.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

struct EpochRecord {
  int epoch = 0;
  double nll = 0.0;  // normalized negative log marginal likelihood (train)
  double wall_ms = 0.0;
};

struct RunRecord {
  ExperimentConfig config;
  double learning_rate = 0.0;
  std::vector<EpochRecord> epochs;
  bool diverged = false;
  std::string divergence_reason;
  int best_epoch = 0;
  double best_nll = 0.0;       // min over epochs; +inf if diverged before any epoch
  double best_raw_loss = 0.0;  // min_w l(θ) at the best epoch
  double test_rmse = 0.0;      // marginalized-w predictive mean
  double test_rmse_w = 0.0;    // learned-w mean z*ᵀw
  std::string nll_method;      // "kernel" (n×n oracle) or "feature" (ridge form)
  std::int64_t iterations = 0;
  double final_sigma2 = 0.0;
};

/// Standardized train/test data, shared by every run on it.
struct PreparedData {
  Dataset train;
  Dataset test;
  Scaler scaler;
  std::string name;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

RunRecord run_experiment(const ExperimentConfig& cfg);
RunRecord run_experiment(const ExperimentConfig& cfg, const PreparedData& data);

class AllDiverged : public std::runtime_error {
 public:
  AllDiverged() : std::runtime_error("every learning rate in the grid diverged") {}
};

struct GridResult {
  double best_rate = 0.0;
  RunRecord best;
  std::vector<RunRecord> runs;  // in grid order
};

/// Runs every rate in cfg.grid; lowest best-epoch NLL wins, ties go to the
/// smaller rate.
GridResult grid_search(const ExperimentConfig& cfg);
GridResult grid_search(const ExperimentConfig& cfg, const PreparedData& data);

/// Normalized training NLL for epoch records. Uses the feature-space min_w
/// form (O(nd²)) when d ≤ n, and the n×n kernel oracle when d > n and
/// n ≤ 2000; the two agree to rounding wherever both apply.
double evaluate_nll(const FeatureMap& map, const FeatureMapParams& alpha, double sigma2,
                    const Dataset& train, std::string* method = nullptr);

nlohmann::json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);
std::string epochs_csv(const RunRecord& r);

/// Writes <dir>/<stem>.json and <dir>/<stem>.csv; returns the JSON path.
std::filesystem::path write_run(const RunRecord& r, const std::filesystem::path& dir,
                                const std::string& stem);

/// Rows: (dataset, batch size); columns: optimizers; cells: mean ± std over
/// split seeds of the chosen metric ("nll" or "rmse").
struct ResultTable {
  std::vector<std::string> columns;
  struct Row {
    std::string dataset;
    std::size_t batch_size = 0;
    std::map<std::string, std::pair<double, double>> cells;  // mean, std
    std::map<std::string, std::size_t> counts;
  };
  std::vector<Row> rows;

  std::string to_markdown() const;
  std::string to_csv() const;
};

ResultTable assemble_table(const std::vector<RunRecord>& runs, const std::string& metric = "nll");

/// Default output directory: $FDGP_OUTPUT_DIR, else "results".
std::filesystem::path default_output_dir();

}  // namespace fdgp

#endif  // FDGP_EXPERIMENT_HPP
