#include "mriv/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "mriv/rng.hpp"

namespace mriv {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double logit(double u) { return std::log(u / (1.0 - u)); }

void check_lengths(const TrueComponents& t) {
  const Eigen::Index m = t.points.rows();
  if (t.mu1_y.size() != m || t.mu0_y.size() != m || t.mu1_a.size() != m ||
      t.mu0_a.size() != m || t.pi.size() != m || t.delta_a.size() != m ||
      t.delta_y.size() != m || t.tau.size() != m) {
    throw std::invalid_argument("TrueComponents: surface length mismatch");
  }
}

}  // namespace

std::optional<std::string> check_components(const TrueComponents& t) {
  check_lengths(t);
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (std::fabs(t.delta_a[i]) < 1e-6) {
      return "instrument strength below 1e-6 at point " + std::to_string(i);
    }
    if (!(t.pi[i] > 0.0 && t.pi[i] < 1.0)) {
      return "propensity outside (0,1) at point " + std::to_string(i);
    }
    if (std::fabs(t.tau[i] * t.delta_a[i] - t.delta_y[i]) > 1e-10) {
      return "tau * delta_a != delta_y at point " + std::to_string(i);
    }
  }
  return std::nullopt;
}

double oracle_second_stage(Eigen::Index i, const TrueComponents& truth,
                           const PluggedEstimates& plugged, const OracleBounds& bounds) {
  check_lengths(truth);
  const double pi = truth.pi[i];
  const double mu1y = truth.mu1_y[i], mu0y = truth.mu0_y[i];
  const double mu1a = truth.mu1_a[i], mu0a = truth.mu0_a[i];
  const double p_hat = plugged.pi[i];
  const double d_hat = plugged.delta_a[i];
  const double m0y_hat = plugged.mu0_y[i], m0a_hat = plugged.mu0_a[i];
  const double t_init = plugged.tau_init[i];

  if (!std::isfinite(p_hat) || !std::isfinite(d_hat) || !std::isfinite(m0y_hat) ||
      !std::isfinite(m0a_hat) || !std::isfinite(t_init)) {
    throw std::invalid_argument("non-finite plugged estimate");
  }
  if (p_hat < bounds.propensity_eps || p_hat > 1.0 - bounds.propensity_eps) {
    throw std::invalid_argument("bound violation: plugged propensity outside [eps, 1-eps]");
  }
  if (std::fabs(d_hat) < bounds.delta_floor) {
    throw std::invalid_argument("bound violation: plugged |delta_a| below floor");
  }

  return pi / (d_hat * p_hat) * (mu1y - mu1a * t_init) +
         (1.0 - pi) / (d_hat * (1.0 - p_hat)) * (mu0a * t_init - mu0y) +
         (m0a_hat * t_init - m0y_hat) / d_hat * (pi / p_hat - (1.0 - pi) / (1.0 - p_hat)) +
         t_init;
}

RobustnessScenario RobustnessScenario::condition1(std::uint64_t seed, double magnitude) {
  RobustnessScenario s;
  s.perturb_pi = s.perturb_delta_a = true;
  s.magnitude = magnitude;
  s.seed = seed;
  return s;
}

RobustnessScenario RobustnessScenario::condition2(std::uint64_t seed, double magnitude) {
  RobustnessScenario s;
  s.perturb_mu0_y = s.perturb_mu0_a = s.perturb_tau_init = true;
  s.magnitude = magnitude;
  s.seed = seed;
  return s;
}

RobustnessScenario RobustnessScenario::condition3(std::uint64_t seed, double magnitude) {
  RobustnessScenario s;
  s.perturb_mu0_y = s.perturb_mu0_a = s.perturb_delta_a = true;
  s.magnitude = magnitude;
  s.seed = seed;
  return s;
}

RobustnessScenario RobustnessScenario::negative_control(std::uint64_t seed, double magnitude) {
  RobustnessScenario s;
  s.perturb_mu0_y = s.perturb_mu0_a = s.perturb_delta_a = s.perturb_pi = s.perturb_tau_init = true;
  s.magnitude = magnitude;
  s.seed = seed;
  return s;
}

PluggedEstimates perturb_estimates(const TrueComponents& truth, const RobustnessScenario& scenario,
                                   const OracleBounds& bounds) {
  check_lengths(truth);
  const Eigen::Index m = truth.size();
  PluggedEstimates out;
  out.mu0_y = truth.mu0_y;
  out.mu0_a = truth.mu0_a;
  out.delta_a = truth.delta_a;
  out.pi = truth.pi;
  out.tau_init = truth.tau;

  const double eps = bounds.propensity_eps;
  const double floor = bounds.delta_floor;
  auto noise_stream = [&](const char* tag) {
    return rng::Stream(rng::derive(scenario.seed, tag));
  };

  if (scenario.perturb_mu0_y) {
    auto s = noise_stream("perturb-mu0-y");
    for (Eigen::Index i = 0; i < m; ++i) out.mu0_y[i] += scenario.magnitude * s.normal();
  }
  if (scenario.perturb_mu0_a) {
    auto s = noise_stream("perturb-mu0-a");
    for (Eigen::Index i = 0; i < m; ++i) out.mu0_a[i] += scenario.magnitude * s.normal();
  }
  if (scenario.perturb_tau_init) {
    auto s = noise_stream("perturb-tau-init");
    for (Eigen::Index i = 0; i < m; ++i) out.tau_init[i] += scenario.magnitude * s.normal();
  }
  if (scenario.perturb_pi) {
    // Additive noise in logit coordinates of the [eps, 1-eps] range: keeps
    // the bound and reduces to the identity at zero magnitude.
    auto s = noise_stream("perturb-pi");
    for (Eigen::Index i = 0; i < m; ++i) {
      const double u = (truth.pi[i] - eps) / (1.0 - 2.0 * eps);
      if (!(u > 0.0 && u < 1.0)) {
        throw std::invalid_argument("true propensity too extreme to perturb within bounds");
      }
      out.pi[i] = eps + (1.0 - 2.0 * eps) * sigmoid(logit(u) + scenario.magnitude * s.normal());
    }
  }
  if (scenario.perturb_delta_a) {
    // Scales the headroom above the floor; sign and bound are preserved and
    // zero magnitude reproduces the truth.
    auto s = noise_stream("perturb-delta-a");
    for (Eigen::Index i = 0; i < m; ++i) {
      const double d = truth.delta_a[i];
      const double mag = std::fabs(d);
      if (mag < floor) {
        throw std::invalid_argument("true |delta_a| below floor; cannot perturb within bounds");
      }
      const double sign = d < 0.0 ? -1.0 : 1.0;
      out.delta_a[i] = sign * (floor + (mag - floor) * std::exp(scenario.magnitude * s.normal()));
    }
  }
  return out;
}

RobustnessReport check_robustness(const TrueComponents& truth, const RobustnessScenario& scenario,
                                  double tolerance, const OracleBounds& bounds) {
  PluggedEstimates plugged = perturb_estimates(truth, scenario, bounds);
  RobustnessReport report;
  report.abs_error.resize(truth.size());
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    const double value = oracle_second_stage(i, truth, plugged, bounds);
    report.abs_error[i] = std::fabs(value - truth.tau[i]);
  }
  report.max_abs_error = truth.size() > 0 ? report.abs_error.maxCoeff() : 0.0;
  report.pass = report.max_abs_error <= tolerance;
  return report;
}

double wald_identity_check(const TrueComponents& truth) {
  check_lengths(truth);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    worst = std::max(worst, std::fabs(truth.delta_y[i] / truth.delta_a[i] - truth.tau[i]));
  }
  return worst;
}

}  // namespace mriv
