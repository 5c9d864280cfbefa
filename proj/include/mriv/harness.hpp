#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mriv/dataset.hpp"
#include "mriv/estimators.hpp"
#include "mriv/oracle.hpp"
#include "mriv/simgen.hpp"

namespace mriv {

/// Root mean squared error between two equal-length vectors.
double rmse(const Eigen::VectorXd& estimates, const Eigen::VectorXd& oracle);

enum class GeneratorKind { gp_sim, semi_synthetic, external_file };

std::string to_string(GeneratorKind g);

/// One benchmark run: data source, methods, sizes, seeds and backends.
struct ExperimentConfig {
  GeneratorKind generator = GeneratorKind::gp_sim;
  SimConfig sim;
  std::string data_path;

  std::vector<std::string> methods{"mriv", "wald"};
  std::vector<Eigen::Index> n_values;          // empty selects {sim.n}
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double test_fraction = 0.2;
  std::uint64_t master_seed = 42;

  RegressorSpec nuisance_spec = RegressorSpec::mlp_default();
  RegressorSpec stage2_spec = RegressorSpec::kernel_ridge_default();
  std::optional<RegressorSpec> wald_spec;      // components of the standalone wald method
  std::optional<RegressorSpec> tlearner_spec;  // arms of the t-learner
  ClipConfig clip;

  std::vector<Eigen::Index> effective_n_values() const {
    return n_values.empty() ? std::vector<Eigen::Index>{sim.n} : n_values;
  }
};

/// Parses the line-based `key = value` config format (dotted keys, '#'
/// comments). Unknown keys are errors.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

struct ResultRecord {
  std::string method;
  Eigen::Index n = 0;
  std::uint64_t seed = 0;
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double wall_time_s = 0.0;
  double param = std::numeric_limits<double>::quiet_NaN();  // sweep value
  bool ok = false;
  std::string error;
};

struct Aggregate {
  std::string method;
  Eigen::Index n = 0;
  double param = std::numeric_limits<double>::quiet_NaN();
  double rmse_mean = std::numeric_limits<double>::quiet_NaN();
  double rmse_sd = std::numeric_limits<double>::quiet_NaN();
  int cells = 0;     // successful cells entering the aggregate
  int failures = 0;  // crashed cells recorded as NA
};

struct ResultsTable {
  std::vector<ResultRecord> records;

  /// Mean and sample SD of rmse per (method, n, param); failed cells are
  /// excluded and counted separately.
  std::vector<Aggregate> aggregates() const;

  /// Aggregate lookup for acceptance checks; throws when absent.
  Aggregate aggregate_for(const std::string& method, Eigen::Index n) const;
};

/// Runs every (n, seed, method) cell: generate or load data, 80/20 split,
/// fit on train, RMSE against the oracle CATE on test. A crashed cell is
/// recorded as NA; the run continues.
ResultsTable run_experiment(const ExperimentConfig& cfg);

/// Reruns the experiment per confounding level with methods fixed to
/// {mriv, t-learner}; records carry the level in `param`.
ResultsTable sweep_confounding(ExperimentConfig cfg, const std::vector<double>& alpha_u_values);

/// Reruns the experiment per smoothness level of the control outcome
/// surface with methods fixed to {mriv, wald}.
ResultsTable sweep_smoothness(ExperimentConfig cfg, const std::vector<double>& alpha_values);

struct RobustnessSuiteRow {
  int trial = 0;
  std::string condition;  // condition1 | condition2 | condition3 | negative-control
  double max_abs_error = 0.0;
  bool pass = false;      // within tolerance of the oracle CATE
};

struct RobustnessSuiteReport {
  std::vector<RobustnessSuiteRow> rows;
  double tolerance = 1e-10;
  bool conditions_pass = false;       // every conditioned scenario within tolerance
  double negative_fail_fraction = 0;  // negative controls with error > 1e-3
  bool pass = false;
};

/// Freshly drawn GP components per trial; all three robustness conditions
/// checked at the tolerance plus an all-perturbed negative control.
RobustnessSuiteReport run_robustness_suite(int trials, int points, std::uint64_t seed,
                                           double tolerance = 1e-10);

/// Detail CSV: method,n,seed,rmse,wall_time_s. Summary CSV:
/// method,n,rmse_mean,rmse_sd. Failed cells emit NA.
void emit_results(const ResultsTable& t, const std::string& detail_path,
                  const std::string& summary_path);

/// Sweep variants with a leading `param` column.
void emit_sweep_results(const ResultsTable& t, const std::string& detail_path,
                        const std::string& summary_path);

/// Reads a detail CSV back (inverse of emit_results).
ResultsTable read_results(const std::string& detail_path);

void emit_robustness_report(const RobustnessSuiteReport& r, const std::string& path);

/// Builds the per-cell dataset exactly as run_experiment does; exposed for
/// tests and the Monte-Carlo acceptance checks.
SimResult generate_cell_data(const ExperimentConfig& cfg, Eigen::Index n, std::uint64_t seed);

/// Fits one method on the training set using the config's specs and the
/// given cell seed.
CateEstimator fit_method(const std::string& method, const Dataset& train,
                         const ExperimentConfig& cfg, std::uint64_t cell_key);

}  // namespace mriv
