// fdgp: command-line front end for the experiment harness.
#include "fdgp/diagnostics.hpp"
#include "fdgp/experiment.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace fdgp;

namespace {

// Config keys exposed as --flags (underscores become dashes).
const std::vector<std::string> kConfigKeys = {
    "csv", "target", "dataset_name", "train_fraction", "features", "feature_dim", "widths",
    "rff_dim", "rff_length_scale", "rff_magnitude", "rff_seed", "init_sigma2", "optimizer",
    "batch_size", "epochs", "lr", "grid", "schedule", "b_t", "mu", "mu_growth", "mu_every",
    "dual_step", "matrix_step_scale", "sigma_min", "zeta_max", "shared_batch",
    "without_replacement", "streaming_init", "step_rule", "split_seed", "init_seed",
    "batch_seed", "output", "synth_n", "synth_p", "synth_sigma2", "synth_features", "synth_dim",
    "synth_widths", "synth_seed", "synth_noise_seed"};

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::vector<std::string> sets;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value file applied before flags")
        ->check(CLI::ExistingFile);
    for (const auto& key : kConfigKeys) app->add_option("--" + dashed(key), values[key]);
    app->add_option("--set", sets, "extra key=value pairs");
  }

  ExperimentConfig build(CLI::App* app) const {
    ExperimentConfig cfg;
    if (!config_file.empty()) cfg = load_config(config_file, cfg);
    for (const auto& key : kConfigKeys)
      if (app->count("--" + dashed(key)) > 0) set_config_value(cfg, key, values.at(key));
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
      set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  }
};

std::string run_stem(const RunRecord& r) {
  std::ostringstream os;
  os << (r.config.dataset_name.empty() ? "run" : r.config.dataset_name) << '_'
     << to_string(r.config.optimizer) << "_s" << r.config.batch_size << "_split"
     << r.config.split_seed << "_lr" << std::setprecision(3) << r.learning_rate;
  return os.str();
}

fs::path output_dir(const ExperimentConfig& cfg) {
  return cfg.output.empty() ? default_output_dir() : fs::path(cfg.output);
}

void print_summary(const RunRecord& r) {
  std::cout << to_string(r.config.optimizer) << " s=" << r.config.batch_size << " lr=" << r.learning_rate;
  if (r.diverged) std::cout << " diverged (" << r.divergence_reason << ")";
  std::cout << " best_epoch=" << r.best_epoch << " best_nll=" << r.best_nll
            << " test_rmse=" << r.test_rmse << '\n';
}

std::vector<RunRecord> load_runs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& e : fs::recursive_directory_iterator(in))
        if (e.path().extension() == ".json") files.push_back(e.path());
    } else {
      files.emplace_back(in);
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<RunRecord> runs;
  for (const auto& f : files) {
    std::ifstream is(f);
    if (!is) throw std::runtime_error("cannot read " + f.string());
    runs.push_back(run_record_from_json(nlohmann::json::parse(is)));
  }
  return runs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic hyperparameter learning for feature-map Gaussian processes"};
  app.require_subcommand(1);

  ConfigFlags run_flags, grid_flags;
  auto* run = app.add_subcommand("run", "train once at --lr and write a run record");
  run_flags.attach(run);
  auto* grid = app.add_subcommand("grid", "train at every rate of --grid, report the best");
  grid_flags.attach(grid);

  SyntheticSpec synth_spec;
  std::string synth_features = "linear", synth_out;
  std::vector<Eigen::Index> synth_widths;
  auto* synth = app.add_subcommand("synth", "sample a synthetic GP dataset to CSV");
  synth->add_option("--n", synth_spec.n, "rows")->check(CLI::PositiveNumber);
  synth->add_option("--p", synth_spec.p, "input columns")->check(CLI::PositiveNumber);
  synth->add_option("--sigma2", synth_spec.sigma2, "noise variance");
  synth->add_option("--features", synth_features, "identity, linear, mlp, mlp+rff");
  synth->add_option("--dim", synth_spec.features.dim, "feature dimension d");
  synth->add_option("--widths", synth_widths, "MLP widths")->delimiter(',');
  synth->add_option("--seed", synth_spec.seed);
  synth->add_option("--out", synth_out, "output CSV")->required();

  std::vector<std::string> table_inputs;
  std::string table_metric = "nll", table_format = "markdown", table_out;
  auto* table = app.add_subcommand("table", "merge run records into a results grid");
  table->add_option("inputs", table_inputs, "run JSON files or directories")->required();
  table->add_option("--metric", table_metric)->check(CLI::IsMember({"nll", "rmse"}));
  table->add_option("--format", table_format)->check(CLI::IsMember({"markdown", "csv"}));
  table->add_option("--out", table_out, "write to file instead of stdout");

  std::uint64_t check_seed = 0;
  auto* check = app.add_subcommand("check", "run the oracle and identity self-checks");
  check->add_option("--seed", check_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const ExperimentConfig cfg = run_flags.build(run);
      const RunRecord r = run_experiment(cfg);
      print_summary(r);
      std::cout << "wrote " << write_run(r, output_dir(cfg), run_stem(r)).string() << '\n';
    } else if (*grid) {
      const ExperimentConfig cfg = grid_flags.build(grid);
      GridResult g;
      try {
        g = grid_search(cfg);
      } catch (const AllDiverged& e) {
        std::cerr << "fdgp: " << e.what() << '\n';
        return 2;
      }
      for (const auto& r : g.runs) {
        print_summary(r);
        write_run(r, output_dir(cfg) / "grid", run_stem(r));
      }
      std::cout << "best rate " << g.best_rate << '\n';
      std::cout << "wrote " << write_run(g.best, output_dir(cfg), run_stem(g.best)).string() << '\n';
    } else if (*synth) {
      if (!synth_widths.empty()) synth_spec.features.widths = synth_widths;
      synth_spec.features.kind = parse_feature_kind(synth_features);
      const SyntheticData s = gen_synthetic(synth_spec);
      save_csv(synth_out, s.data);
      std::cout << "wrote " << s.data.size() << " rows to " << synth_out << '\n';
    } else if (*table) {
      const ResultTable t = assemble_table(load_runs(table_inputs), table_metric);
      const std::string text = table_format == "csv" ? t.to_csv() : t.to_markdown();
      if (table_out.empty()) std::cout << text;
      else std::ofstream(table_out) << text;
    } else if (*check) {
      bool all = true;
      for (const auto& c : run_self_checks(check_seed)) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  error=" << c.error
                  << " tol=" << c.tolerance << '\n';
        all = all && c.passed;
      }
      return all ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "fdgp: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
