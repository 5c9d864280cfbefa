#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mriv/dataset.hpp"
#include "mriv/estimators.hpp"
#include "mriv/harness.hpp"
#include "mriv/netlearn.hpp"
#include "mriv/oracle.hpp"
#include "mriv/regress.hpp"
#include "mriv/simgen.hpp"

namespace py = pybind11;
using namespace mriv;

namespace {

Dataset make_dataset(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& instrument,
                     const Eigen::VectorXd& treatment, const Eigen::VectorXd& outcome,
                     std::optional<Eigen::VectorXd> oracle_cate) {
  Dataset d;
  d.covariates = covariates;
  d.instrument = instrument;
  d.treatment = treatment;
  d.outcome = outcome;
  d.oracle_cate = std::move(oracle_cate);
  require_valid(d);
  return d;
}

RegressorSpec spec_from_kwargs(const std::string& variant, double ridge_penalty,
                               double lengthscale, int k_neighbors, int hidden,
                               double learning_rate, int epochs, int batch_size,
                               std::uint64_t seed) {
  RegressorSpec s;
  s.variant = regressor_variant_from_string(variant);
  s.ridge_penalty = ridge_penalty;
  s.kernel_lengthscale = lengthscale;
  s.k_neighbors = k_neighbors;
  s.mlp_hidden1 = hidden;
  s.mlp_hidden2 = hidden;
  s.mlp_learning_rate = learning_rate;
  s.mlp_epochs = epochs;
  s.mlp_batch_size = batch_size;
  s.seed = seed;
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multiply robust CATE estimation with a binary instrument";

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("covariates"), py::arg("instrument"),
           py::arg("treatment"), py::arg("outcome"), py::arg("oracle_cate") = std::nullopt)
      .def_readonly("covariates", &Dataset::covariates)
      .def_readonly("instrument", &Dataset::instrument)
      .def_readonly("treatment", &Dataset::treatment)
      .def_readonly("outcome", &Dataset::outcome)
      .def_property_readonly("oracle_cate",
                             [](const Dataset& d) { return d.oracle_cate; })
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("p", &Dataset::p);

  m.def("load_dataset", &load_dataset, py::arg("path"), py::arg("has_oracle") = false);
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
  m.def("validate", [](const Dataset& d) { return validate(d); });
  m.def(
      "split_train_test",
      [](const Dataset& d, double test_fraction, std::uint64_t seed) {
        DataSplit s = split_train_test(d, test_fraction, seed);
        return py::make_tuple(s.train_indices, s.test_indices);
      },
      py::arg("dataset"), py::arg("test_fraction"), py::arg("seed"));

  py::class_<RegressorSpec>(m, "RegressorSpec")
      .def(py::init(&spec_from_kwargs), py::arg("variant") = "ridge",
           py::arg("ridge_penalty") = 1e-3, py::arg("lengthscale") = 0.0,
           py::arg("k_neighbors") = 5, py::arg("hidden") = 0, py::arg("learning_rate") = 1e-3,
           py::arg("epochs") = 100, py::arg("batch_size") = 128, py::arg("seed") = 0)
      .def_property_readonly("variant",
                             [](const RegressorSpec& s) { return to_string(s.variant); })
      .def_readwrite("ridge_penalty", &RegressorSpec::ridge_penalty)
      .def_readwrite("seed", &RegressorSpec::seed);

  py::class_<FittedRegressor>(m, "FittedRegressor")
      .def("predict", &FittedRegressor::predict, py::arg("X"));
  py::class_<FittedClassifier>(m, "FittedClassifier")
      .def("predict_proba", &FittedClassifier::predict_proba, py::arg("X"));
  m.def("fit_regressor", &fit_regressor, py::arg("spec"), py::arg("X"), py::arg("y"));
  m.def("fit_classifier", &fit_classifier, py::arg("spec"), py::arg("X"), py::arg("labels"),
        py::arg("allow_constant") = true);
  m.def(
      "gradient_check",
      [](const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
         double tolerance) {
        GradientCheckReport r = gradient_check(spec, X, y, tolerance);
        return py::make_tuple(r.max_rel_error, r.pass);
      },
      py::arg("spec"), py::arg("X"), py::arg("y"), py::arg("tolerance") = 1e-4);

  py::class_<ClipConfig>(m, "ClipConfig")
      .def(py::init([](double delta_floor, double propensity_eps, std::optional<double> tau_cap) {
             ClipConfig c;
             c.delta_floor = delta_floor;
             c.propensity_eps = propensity_eps;
             c.tau_cap = tau_cap;
             return c;
           }),
           py::arg("delta_floor") = 0.05, py::arg("propensity_eps") = 0.01,
           py::arg("tau_cap") = std::nullopt)
      .def_readwrite("delta_floor", &ClipConfig::delta_floor)
      .def_readwrite("propensity_eps", &ClipConfig::propensity_eps);

  py::class_<CateEstimator>(m, "CateEstimator")
      .def_readonly("kind", &CateEstimator::kind)
      .def_readonly("provenance", &CateEstimator::provenance)
      .def("predict", [](const CateEstimator& e, const Eigen::MatrixXd& X) {
        return predict_cate(e, X);
      });

  m.def(
      "fit_mriv",
      [](const Dataset& train, const RegressorSpec& nuisance, const RegressorSpec& stage2,
         const ClipConfig& clip) {
        return fit_mriv(train, NuisanceSpecs::uniform(nuisance), stage2, clip);
      },
      py::arg("train"), py::arg("nuisance_spec"), py::arg("stage2_spec"),
      py::arg("clip") = ClipConfig{});
  m.def(
      "fit_mriv_crossfit",
      [](const Dataset& d, const RegressorSpec& nuisance, const RegressorSpec& stage2,
         const ClipConfig& clip, std::uint64_t seed) {
        return fit_mriv_crossfit(d, NuisanceSpecs::uniform(nuisance), stage2, clip, seed).combined;
      },
      py::arg("data"), py::arg("nuisance_spec"), py::arg("stage2_spec"),
      py::arg("clip") = ClipConfig{}, py::arg("seed") = 0);
  m.def(
      "fit_wald",
      [](const Dataset& train, const RegressorSpec& components, const ClipConfig& clip) {
        return fit_wald(train, NuisanceSpecs::uniform(components), clip);
      },
      py::arg("train"), py::arg("component_spec"), py::arg("clip") = ClipConfig{});
  m.def("fit_tlearner", &fit_tlearner, py::arg("train"), py::arg("outcome_spec"));
  m.def(
      "fit_drlearner",
      [](const Dataset& train, const RegressorSpec& nuisance, const RegressorSpec& stage2,
         const ClipConfig& clip) {
        return fit_drlearner(train, NuisanceSpecs::uniform(nuisance), stage2, clip);
      },
      py::arg("train"), py::arg("nuisance_spec"), py::arg("stage2_spec"),
      py::arg("clip") = ClipConfig{});
  m.def(
      "fit_driv",
      [](const Dataset& train, const RegressorSpec& nuisance, const RegressorSpec& stage2,
         const ClipConfig& clip) {
        return fit_driv(train, NuisanceSpecs::uniform(nuisance), stage2, clip);
      },
      py::arg("train"), py::arg("nuisance_spec"), py::arg("stage2_spec"),
      py::arg("clip") = ClipConfig{});

  py::class_<TrueComponents>(m, "TrueComponents")
      .def_readonly("points", &TrueComponents::points)
      .def_readonly("mu1_y", &TrueComponents::mu1_y)
      .def_readonly("mu0_y", &TrueComponents::mu0_y)
      .def_readonly("mu1_a", &TrueComponents::mu1_a)
      .def_readonly("mu0_a", &TrueComponents::mu0_a)
      .def_readonly("pi", &TrueComponents::pi)
      .def_readonly("delta_a", &TrueComponents::delta_a)
      .def_readonly("delta_y", &TrueComponents::delta_y)
      .def_readonly("tau", &TrueComponents::tau);

  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init([](Eigen::Index n, Eigen::Index p, double nu_delta_y, double nu_mu0_y,
                       double nu_treatment, double lengthscale, double confounding,
                       std::uint64_t seed) {
             SimConfig c;
             c.n = n;
             c.p = p;
             c.nu_delta_y = nu_delta_y;
             c.nu_mu0_y = nu_mu0_y;
             c.nu_treatment = nu_treatment;
             c.lengthscale = lengthscale;
             c.confounding = confounding;
             c.seed = seed;
             return c;
           }),
           py::arg("n") = 1000, py::arg("p") = 1, py::arg("nu_delta_y") = 50.0,
           py::arg("nu_mu0_y") = 1.5, py::arg("nu_treatment") = 50.0,
           py::arg("lengthscale") = 1.0, py::arg("confounding") = 1.0, py::arg("seed") = 0)
      .def_readwrite("n", &SimConfig::n)
      .def_readwrite("confounding", &SimConfig::confounding)
      .def_readwrite("seed", &SimConfig::seed);

  m.def(
      "matern",
      [](const Eigen::VectorXd& x1, const Eigen::VectorXd& x2, double lengthscale, double nu) {
        return matern(x1.transpose(), x2.transpose(), MaternParams{lengthscale, nu});
      },
      py::arg("x1"), py::arg("x2"), py::arg("lengthscale") = 1.0, py::arg("nu") = 1.5);
  m.def(
      "sample_gp",
      [](const Eigen::MatrixXd& points, double lengthscale, double nu, std::uint64_t seed) {
        return sample_gp(points, MaternParams{lengthscale, nu}, seed).values;
      },
      py::arg("points"), py::arg("lengthscale") = 1.0, py::arg("nu") = 1.5, py::arg("seed") = 0);

  m.def(
      "simulate",
      [](const SimConfig& cfg) {
        SimResult r = simulate(cfg);
        return py::make_tuple(r.data, r.truth);
      },
      py::arg("config"));
  m.def(
      "semi_synthetic",
      [](const SimConfig& cfg) {
        SimResult r = semi_synthetic(cfg);
        return py::make_tuple(r.data, r.truth);
      },
      py::arg("config"));
  m.def(
      "mc_verify",
      [](const SimConfig& cfg, int bins, int m_draws) {
        McVerifyReport r = mc_verify(cfg, bins, m_draws);
        return py::make_tuple(r.pass, r.bin_pass_fraction);
      },
      py::arg("config"), py::arg("bins") = 10, py::arg("m") = 100000);

  m.def("rmse", &rmse, py::arg("estimates"), py::arg("oracle"));
  m.def(
      "run_robustness_suite",
      [](int trials, int points, std::uint64_t seed, double tolerance) {
        RobustnessSuiteReport r = run_robustness_suite(trials, points, seed, tolerance);
        return py::make_tuple(r.pass, r.conditions_pass, r.negative_fail_fraction);
      },
      py::arg("trials") = 100, py::arg("points") = 50, py::arg("seed") = 0,
      py::arg("tolerance") = 1e-10);

  m.def(
      "run_experiment_config",
      [](const std::string& config_text) {
        ResultsTable t = run_experiment(parse_config_text(config_text));
        py::list records;
        for (const auto& r : t.records) {
          py::dict d;
          d["method"] = r.method;
          d["n"] = r.n;
          d["seed"] = r.seed;
          d["rmse"] = r.ok ? py::cast(r.rmse) : py::none();
          d["wall_time_s"] = r.wall_time_s;
          if (!r.ok) d["error"] = r.error;
          records.append(d);
        }
        return records;
      },
      py::arg("config_text"));
}
