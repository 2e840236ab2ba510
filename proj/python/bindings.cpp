#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fdgp/diagnostics.hpp"
#include "fdgp/experiment.hpp"
#include "fdgp/objective.hpp"
#include "fdgp/predict.hpp"

#include <optional>
#include <string>

namespace py = pybind11;
using namespace fdgp;

namespace {

// Configs travel as JSON text; missing keys keep their defaults.
ExperimentConfig config_from_text(const std::string& text) {
  nlohmann::json j = config_to_json(ExperimentConfig{});
  const nlohmann::json overrides = nlohmann::json::parse(text);
  if (!overrides.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& [key, value] : overrides.items()) {
    if (!j.contains(key)) throw std::invalid_argument("unknown config key: " + key);
    if (key == "synthetic" && j[key].is_null() && value.is_object()) {
      ExperimentConfig with_synth;
      with_synth.synthetic = SyntheticSpec{};
      j[key] = config_to_json(with_synth)[key];
    }
    if (j[key].is_object() && value.is_object())
      j[key].merge_patch(value);
    else
      j[key] = value;
  }
  ExperimentConfig cfg = config_from_json(j);
  cfg.validate();
  return cfg;
}

Dataset as_dataset(const MatrixXd& X, const VectorXd& y) {
  Dataset d{X, y, {}};
  d.validate();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Stochastic hyperparameter learning for feature-space Gaussian processes.";

  m.def("default_config", [] { return config_to_json(ExperimentConfig{}).dump(); },
        "Default experiment configuration as JSON text.");

  m.def(
      "run_experiment",
      [](const std::string& config) {
        const ExperimentConfig cfg = config_from_text(config);
        RunRecord r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg);
        }
        return to_json(r).dump();
      },
      py::arg("config"), "Runs one configuration; returns the run record as JSON text.");

  m.def(
      "grid_search",
      [](const std::string& config) {
        const ExperimentConfig cfg = config_from_text(config);
        GridResult g;
        {
          py::gil_scoped_release release;
          g = grid_search(cfg);
        }
        nlohmann::json out{{"best_rate", g.best_rate}, {"best", to_json(g.best)}};
        out["runs"] = nlohmann::json::array();
        for (const auto& r : g.runs) out["runs"].push_back(to_json(r));
        return out.dump();
      },
      py::arg("config"), "Runs every rate in the grid; returns JSON text.");

  m.def(
      "gen_synthetic",
      [](Eigen::Index n, Eigen::Index p, double sigma2, Eigen::Index d, std::uint64_t seed,
         std::optional<std::uint64_t> noise_seed) {
        SyntheticSpec spec;
        spec.n = n;
        spec.p = p;
        spec.sigma2 = sigma2;
        spec.features = FeatureSpec{FeatureKind::linear, d};
        spec.seed = seed;
        spec.noise_seed = noise_seed;
        SyntheticData s = gen_synthetic(spec);
        return py::make_tuple(s.data.X, s.data.y);
      },
      py::arg("n"), py::arg("p"), py::arg("sigma2"), py::arg("d"), py::arg("seed") = 0,
      py::arg("noise_seed") = py::none(),
      "Draws (X, y) with y ~ N(0, ZZᵀ + σ²I) for a random linear feature map.");

  m.def(
      "exact_nll",
      [](const MatrixXd& Z, const VectorXd& y, double sigma2) {
        const IdentityMap map(Z.cols());
        return normalized_nll(exact_nll_oracle(map, FeatureMapParams{}, sigma2, as_dataset(Z, y)),
                              Z.rows());
      },
      py::arg("Z"), py::arg("y"), py::arg("sigma2"),
      "Per-sample negative log marginal likelihood of y under N(0, ZZᵀ + σ²I), via the n×n kernel.");

  m.def(
      "profile_nll",
      [](const MatrixXd& Z, const VectorXd& y, double sigma2) {
        const IdentityMap map(Z.cols());
        return normalized_nll(profile_loss(map, FeatureMapParams{}, sigma2, as_dataset(Z, y)),
                              Z.rows());
      },
      py::arg("Z"), py::arg("y"), py::arg("sigma2"),
      "Same quantity through the d×d feature-space form.");

  m.def(
      "posterior",
      [](const MatrixXd& Z, const VectorXd& y, const MatrixXd& Z_star, double sigma2) {
        const IdentityMap map(Z.cols());
        const Posterior post = fdgp::posterior(map, FeatureMapParams{}, sigma2, as_dataset(Z, y), Z_star);
        return py::make_tuple(post.mean, post.variance);
      },
      py::arg("Z"), py::arg("y"), py::arg("Z_star"), py::arg("sigma2"),
      "Predictive mean and variance at the rows of Z_star.");

  m.def(
      "self_check",
      [](std::uint64_t seed) {
        py::list out;
        for (const auto& c : run_self_checks(seed))
          out.append(py::dict(py::arg("name") = c.name, py::arg("passed") = c.passed,
                              py::arg("error") = c.error, py::arg("tolerance") = c.tolerance));
        return out;
      },
      py::arg("seed") = 0, "Runs the built-in numerical checks; one dict per check.");

  py::register_exception<AllDiverged>(m, "AllDiverged");
}
