#include "doctest.h"
#include "helpers.hpp"

#include "fdgp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

using namespace fdgp;

namespace {

ExperimentConfig small_config(OptimizerKind opt) {
  ExperimentConfig cfg;
  SyntheticSpec sp;
  sp.n = 96;
  sp.p = 3;
  sp.sigma2 = 0.5;
  sp.features = {FeatureKind::linear, 4};
  cfg.synthetic = sp;
  cfg.dataset_name = "tiny";
  cfg.features = {FeatureKind::linear, 4};
  cfg.optimizer = opt;
  cfg.batch_size = 16;
  cfg.epochs = 5;
  cfg.learning_rate = 1e-2;
  cfg.train_fraction = 0.75;
  return cfg;
}

// Every field except wall-clock timings.
void check_same_record(const RunRecord& a, const RunRecord& b) {
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (std::size_t k = 0; k < a.epochs.size(); ++k) {
    CHECK(a.epochs[k].epoch == b.epochs[k].epoch);
    CHECK(a.epochs[k].nll == b.epochs[k].nll);
  }
  CHECK(a.best_epoch == b.best_epoch);
  CHECK(a.best_nll == b.best_nll);
  CHECK(a.best_raw_loss == b.best_raw_loss);
  CHECK(a.test_rmse == b.test_rmse);
  CHECK(a.test_rmse_w == b.test_rmse_w);
  CHECK(a.final_sigma2 == b.final_sigma2);
  CHECK(a.iterations == b.iterations);
  CHECK(a.diverged == b.diverged);
  CHECK(config_to_json(a.config) == config_to_json(b.config));
}

RunRecord fake_run(const std::string& dataset, OptimizerKind opt, std::size_t s,
                   std::uint64_t split, double nll) {
  RunRecord r;
  r.config.dataset_name = dataset;
  r.config.optimizer = opt;
  r.config.batch_size = s;
  r.config.split_seed = split;
  r.best_nll = nll;
  r.test_rmse = 2.0 * nll;
  return r;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("config validation") {
  ExperimentConfig cfg = small_config(OptimizerKind::scgd);
  CHECK_NOTHROW(cfg.validate());
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
  cfg = small_config(OptimizerKind::scgd);
  cfg.grid.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config(OptimizerKind::scgd);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("config text and JSON forms") {
  const ExperimentConfig cfg = parse_config(
      "# comment\noptimizer = minimax\nbatch_size = 8\ngrid = 0.1, 0.01\nmu = 2.5\n"
      "synth_n = 64\nsynth_noise_seed = 4\nfeatures = mlp\nwidths = 6,3\n");
  CHECK(cfg.optimizer == OptimizerKind::minimax);
  CHECK(cfg.batch_size == 8);
  CHECK(cfg.grid == std::vector<double>{0.1, 0.01});
  CHECK(cfg.mu == 2.5);
  REQUIRE(cfg.synthetic.has_value());
  CHECK(cfg.synthetic->n == 64);
  CHECK(cfg.synthetic->noise_seed == std::optional<std::uint64_t>(4));
  CHECK(cfg.features.kind == FeatureKind::mlp);
  CHECK(cfg.features.widths == std::vector<Eigen::Index>{6, 3});
  CHECK_THROWS_AS(parse_config("no_such_key = 1\n"), std::invalid_argument);

  const ExperimentConfig back = config_from_json(config_to_json(cfg));
  CHECK(config_to_json(back) == config_to_json(cfg));
}

TEST_CASE("runs are deterministic per seed") {
  for (OptimizerKind opt : {OptimizerKind::minimax, OptimizerKind::scgd, OptimizerKind::bsgd}) {
    const ExperimentConfig cfg = small_config(opt);
    const RunRecord a = run_experiment(cfg), b = run_experiment(cfg);
    INFO(to_string(opt));
    check_same_record(a, b);
    CHECK(a.epochs.size() == 5);
    CHECK(a.iterations == 5 * 5);  // ⌈72 / 16⌉ batches per epoch
    CHECK(std::isfinite(a.test_rmse));

    ExperimentConfig other = cfg;
    other.batch_seed = 99;
    CHECK(run_experiment(other).epochs.back().nll != a.epochs.back().nll);
  }
}

TEST_CASE("best epoch is the argmin of the logged NLL") {
  ExperimentConfig cfg = small_config(OptimizerKind::bsgd);
  cfg.epochs = 12;
  cfg.learning_rate = 0.1;
  const RunRecord r = run_experiment(cfg);
  REQUIRE_FALSE(r.epochs.empty());
  const auto it = std::min_element(r.epochs.begin(), r.epochs.end(),
                                   [](const auto& a, const auto& b) { return a.nll < b.nll; });
  CHECK(r.best_epoch == it->epoch);
  CHECK(r.best_nll == it->nll);
}

TEST_CASE("re-running from the JSON record reproduces it") {
  const RunRecord r = run_experiment(small_config(OptimizerKind::minimax));
  const RunRecord parsed = run_record_from_json(to_json(r));
  check_same_record(parsed, r);
  ExperimentConfig echoed = parsed.config;
  check_same_record(run_experiment(echoed), r);

  const auto dir = std::filesystem::temp_directory_path() / "fdgp_experiment_test";
  std::filesystem::remove_all(dir);
  const auto json_path = write_run(r, dir, "tiny_minimax");
  CHECK(std::filesystem::exists(json_path));
  std::ifstream csv(dir / "tiny_minimax.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "epoch,nll,wall_ms");
}

TEST_CASE("grid search") {
  ExperimentConfig cfg = small_config(OptimizerKind::scgd);
  SUBCASE("singleton grid") {
    cfg.grid = {3e-3};
    const GridResult g = grid_search(cfg);
    CHECK(g.best_rate == 3e-3);
    CHECK(g.runs.size() == 1);
  }
  SUBCASE("divergent rates are filtered") {
    cfg.grid = {1e12, 1e-2};
    const GridResult g = grid_search(cfg);
    CHECK(g.runs[0].diverged);
    CHECK(std::isinf(g.runs[0].best_nll));
    CHECK(g.best_rate == 1e-2);
  }
  SUBCASE("winner is no worse than any member") {
    cfg.grid = {1e-3, 1e-2, 3e-2, 1e-1};
    const GridResult g = grid_search(cfg);
    for (const auto& r : g.runs) CHECK(g.best.best_nll <= r.best_nll);
    CHECK(g.best.learning_rate == g.best_rate);
  }
  SUBCASE("every rate diverging is an error") {
    cfg.grid = {1e12, 1e13};
    CHECK_THROWS_AS(grid_search(cfg), AllDiverged);
  }
}

TEST_CASE("SCGD with small batches reaches the full-batch optimum") {
  // linear features, d = 8, n = 512, same epoch budget, grid-searched rates
  ExperimentConfig cfg;
  SyntheticSpec sp;
  sp.n = 512;
  sp.p = 4;
  sp.sigma2 = 8.0;
  sp.features = {FeatureKind::linear, 8};
  cfg.synthetic = sp;
  cfg.features = {FeatureKind::linear, 8};
  cfg.train_fraction = 1.0;
  cfg.epochs = 100;
  for (std::uint64_t seed : {0, 2}) {
    cfg.synthetic->seed = seed;
    cfg.init_seed = seed + 1;
    cfg.batch_seed = seed + 2;
    const PreparedData data = prepare_data(cfg);
    ExperimentConfig scgd = cfg;
    scgd.optimizer = OptimizerKind::scgd;
    scgd.batch_size = 8;
    ExperimentConfig full = cfg;
    full.optimizer = OptimizerKind::bsgd;
    full.batch_size = 512;
    const double small = grid_search(scgd, data).best.best_nll;
    const double reference = grid_search(full, data).best.best_nll;
    INFO("seed " << seed << ": scgd s=8 " << small << ", bsgd s=n " << reference);
    CHECK(small <= reference + 0.05);
  }
}

TEST_CASE("evaluate_nll picks the applicable route") {
  Rng rng(1);
  auto lin = make_linear_map(3, 5, true);
  const Dataset d = test::random_dataset(20, 3, rng);
  const HyperParams th = test::random_theta(*lin, rng, 0.4);
  std::string method;
  const double feat = evaluate_nll(*lin, th.alpha, 0.4, d, &method);
  CHECK(method == "feature");
  CHECK(feat == doctest::Approx(normalized_nll(exact_nll_oracle(*lin, th.alpha, 0.4, d), 20)).epsilon(1e-10));

  auto wide = make_linear_map(3, 30, true);
  const HyperParams tw = test::random_theta(*wide, rng, 0.4);
  evaluate_nll(*wide, tw.alpha, 0.4, d, &method);
  CHECK(method == "kernel");
}

TEST_CASE("gen_synthetic") {
  SyntheticSpec sp;
  sp.n = 50;
  sp.p = 2;
  sp.seed = 3;
  const SyntheticData a = gen_synthetic(sp), b = gen_synthetic(sp);
  CHECK(a.data.X == b.data.X);
  CHECK(a.data.y == b.data.y);
  CHECK(a.true_sigma2 == sp.sigma2);

  SUBCASE("noise-dominated draw has variance close to sigma2") {
    SyntheticSpec big;
    big.n = 4096;
    big.p = 2;
    big.sigma2 = 1e4;
    big.features = {FeatureKind::linear, 2};
    const VectorXd y = gen_synthetic(big).data.y;
    const double var = (y.array() - y.mean()).square().mean();
    CHECK(std::abs(var / 1e4 - 1.0) < 0.05);
  }
  SUBCASE("Monte-Carlo covariance matches K + sigma2 I") {
    SyntheticSpec tiny;
    tiny.n = 3;
    tiny.p = 2;
    tiny.sigma2 = 0.5;
    tiny.features = {FeatureKind::linear, 2};
    tiny.seed = 11;
    const SyntheticData ref = gen_synthetic(tiny);
    auto map = build_feature_map(tiny.features, 2);
    const MatrixXd Z = map->features(ref.true_alpha, ref.data.X);
    const MatrixXd C = Z * Z.transpose() + 0.5 * MatrixXd::Identity(3, 3);

    const int reps = 50000;
    MatrixXd sum = MatrixXd::Zero(3, 3);
    for (int r = 0; r < reps; ++r) {
      tiny.noise_seed = 1000 + r;
      const SyntheticData s = gen_synthetic(tiny);
      REQUIRE(s.data.X == ref.data.X);
      sum += s.data.y * s.data.y.transpose();
    }
    const MatrixXd emp = sum / reps;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        // Var(y_i y_j) = C_ii C_jj + C_ij² for zero-mean Gaussians
        const double se = std::sqrt((C(i, i) * C(j, j) + C(i, j) * C(i, j)) / reps);
        INFO("entry " << i << "," << j);
        CHECK(std::abs(emp(i, j) - C(i, j)) < 3.0 * se);
      }
  }
  SUBCASE("large-n route has the same marginal variance") {
    SyntheticSpec s;
    s.n = 6000;
    s.p = 1;
    s.sigma2 = 1e4;
    s.features = {FeatureKind::linear, 1};
    s.covariance_route_max_n = 100;
    const VectorXd y = gen_synthetic(s).data.y;
    const double var = (y.array() - y.mean()).square().mean();
    CHECK(std::abs(var / 1e4 - 1.0) < 0.05);
  }
  CHECK_THROWS_AS(gen_synthetic(SyntheticSpec{0}), std::invalid_argument);
}

TEST_CASE("table assembly is order independent") {
  std::vector<RunRecord> runs = {
      fake_run("b", OptimizerKind::scgd, 8, 0, 1.0), fake_run("b", OptimizerKind::scgd, 8, 1, 3.0),
      fake_run("a", OptimizerKind::bsgd, 8, 0, 2.0), fake_run("a", OptimizerKind::minimax, 64, 0, 0.5),
      fake_run("a", OptimizerKind::minimax, 64, 1, 0.7)};
  const ResultTable t = assemble_table(runs);
  std::reverse(runs.begin(), runs.end());
  const ResultTable u = assemble_table(runs);
  CHECK(t.to_markdown() == u.to_markdown());
  CHECK(t.to_csv() == u.to_csv());

  CHECK(t.columns == std::vector<std::string>{"minimax", "scgd", "bsgd"});
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0].dataset == "a");
  CHECK(t.rows[0].batch_size == 8);
  CHECK(t.rows[1].dataset == "b");
  CHECK(t.rows[1].cells.at("scgd").first == doctest::Approx(2.0));
  CHECK(t.rows[1].cells.at("scgd").second == doctest::Approx(1.0));
  CHECK(t.rows[2].batch_size == 64);
  CHECK(t.rows[2].counts.at("minimax") == 2);

  const ResultTable rm = assemble_table(runs, "rmse");
  CHECK(rm.rows[1].cells.at("scgd").first == doctest::Approx(4.0));
  CHECK_THROWS_AS(assemble_table(runs, "r2"), std::invalid_argument);
}

TEST_CASE("csv data source with a held-out split") {
  const auto dir = std::filesystem::temp_directory_path() / "fdgp_experiment_csv";
  std::filesystem::create_directories(dir);
  SyntheticSpec sp;
  sp.n = 80;
  sp.p = 3;
  save_csv(dir / "d.csv", gen_synthetic(sp).data, "target");
  ExperimentConfig cfg;
  cfg.csv_path = (dir / "d.csv").string();
  cfg.target = "target";
  cfg.train_fraction = 0.75;
  cfg.features = {FeatureKind::linear, 3};
  const PreparedData data = prepare_data(cfg);
  CHECK(data.train.size() == 60);
  CHECK(data.test.size() == 20);
  CHECK(std::abs(data.train.y.mean()) < 1e-12);
  CHECK(data.name == "d");
}

}  // TEST_SUITE
