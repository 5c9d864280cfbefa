#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mriv {

/// True nuisance and CATE surfaces realized at a fixed point set. Produced by
/// the simulators and consumed by the closed-form second-stage checks.
struct TrueComponents {
  Eigen::MatrixXd points;  // m x p evaluation points
  Eigen::VectorXd mu1_y, mu0_y;    // E[Y | Z=i, X]
  Eigen::VectorXd mu1_a, mu0_a;    // E[A | Z=i, X]
  Eigen::VectorXd pi;              // P(Z=1 | X)
  Eigen::VectorXd delta_a;         // mu1_a - mu0_a
  Eigen::VectorXd delta_y;         // mu1_y - mu0_y
  Eigen::VectorXd tau;             // delta_y / delta_a

  Eigen::Index size() const { return points.rows(); }
};

/// First violated TrueComponents invariant, or nullopt.
std::optional<std::string> check_components(const TrueComponents& t);

/// Nuisance estimates evaluated at the same points as a TrueComponents set.
struct PluggedEstimates {
  Eigen::VectorXd mu0_y, mu0_a, delta_a, pi, tau_init;
};

/// Bounds the plugged propensity and instrument-strength estimates must
/// respect for the closed form to be well defined.
struct OracleBounds {
  double propensity_eps = 0.01;  // plugged pi in [eps, 1-eps]
  double delta_floor = 0.05;     // plugged |delta_a| >= floor
};

/// Closed-form value of the population second-stage regression of the
/// pseudo outcome at point index i, for the given plugged estimates.
double oracle_second_stage(Eigen::Index i, const TrueComponents& truth,
                           const PluggedEstimates& plugged,
                           const OracleBounds& bounds = {});

/// Which nuisances are perturbed away from the truth, and how strongly.
struct RobustnessScenario {
  bool perturb_mu0_y = false;
  bool perturb_mu0_a = false;
  bool perturb_delta_a = false;
  bool perturb_pi = false;
  bool perturb_tau_init = false;
  double magnitude = 0.1;
  std::uint64_t seed = 0;

  // Requirement sets of the three robustness conditions: everything outside
  // the set is perturbed.
  static RobustnessScenario condition1(std::uint64_t seed, double magnitude = 0.1);
  static RobustnessScenario condition2(std::uint64_t seed, double magnitude = 0.1);
  static RobustnessScenario condition3(std::uint64_t seed, double magnitude = 0.1);
  static RobustnessScenario negative_control(std::uint64_t seed, double magnitude = 0.1);
};

/// Draws bound-preserving perturbed estimates: additive Gaussian noise for
/// the unconstrained components, logit-space noise for pi, and headroom
/// scaling for delta_a. Zero magnitude reproduces the truth exactly.
PluggedEstimates perturb_estimates(const TrueComponents& truth, const RobustnessScenario& scenario,
                                   const OracleBounds& bounds = {});

struct RobustnessReport {
  Eigen::VectorXd abs_error;  // |oracle_second_stage - tau| per point
  double max_abs_error = 0.0;
  bool pass = false;
};

/// Evaluates the closed form at every point of the scenario's perturbation
/// and compares against the oracle CATE at the given tolerance.
RobustnessReport check_robustness(const TrueComponents& truth, const RobustnessScenario& scenario,
                                  double tolerance, const OracleBounds& bounds = {});

/// Max over points of |delta_y / delta_a - tau|.
double wald_identity_check(const TrueComponents& truth);

}  // namespace mriv
