#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "mriv/dataset.hpp"
#include "mriv/oracle.hpp"
#include "mriv/rng.hpp"

namespace mriv {

struct MaternParams {
  double lengthscale = 1.0;
  double nu = 1.5;
};

/// Matern covariance between two points. Half-integer orders 1/2, 3/2 and 5/2
/// use their closed forms, nu >= 10 uses the squared-exponential limit, and
/// all other orders go through the modified Bessel function.
double matern(const Eigen::RowVectorXd& x1, const Eigen::RowVectorXd& x2, const MaternParams& prm);

/// Same kernel as a function of the Euclidean distance.
double matern_distance(double d, const MaternParams& prm);

struct GpDraw {
  Eigen::MatrixXd points;
  Eigen::VectorXd values;
};

/// Caches the Cholesky factor of one kernel matrix so several functions with
/// the same smoothness can be drawn from a single factorization. Diagonal
/// jitter starts at 1e-8 and escalates once to 1e-6.
class GpSampler {
 public:
  GpSampler(const Eigen::MatrixXd& points, const MaternParams& prm);
  Eigen::VectorXd draw(rng::Stream& stream) const;
  double jitter() const { return jitter_; }

 private:
  Eigen::MatrixXd chol_;  // lower factor
  double jitter_ = 0.0;
};

GpDraw sample_gp(const Eigen::MatrixXd& points, const MaternParams& prm, std::uint64_t seed);

/// Synthetic-data configuration. The smoothness fields are the Matern orders
/// of the drawn surfaces: nu_delta_y for the CATE numerator, nu_mu0_y for the
/// control outcome surface, nu_treatment for the compliance surfaces f1, f0
/// and (unless overridden) the propensity surface g.
struct SimConfig {
  Eigen::Index n = 1000;
  Eigen::Index p = 1;
  double nu_delta_y = 50.0;
  double nu_mu0_y = 1.5;
  double nu_treatment = 50.0;
  std::optional<double> nu_propensity;  // defaults to nu_treatment
  double lengthscale = 1.0;
  double confounding = 1.0;  // coefficient on the latent confounder in Y
  double noise_u_sd = 0.2;
  double noise_a_sd = 0.1;
  double noise_y_sd = 0.3;
  std::uint64_t seed = 0;
};

/// Draws all nuisance/CATE surfaces at the given points:
///   mu1_a = 0.3 sigmoid(f1) + 0.7, mu0_a = 0.3 sigmoid(f0), pi = sigmoid(g),
///   mu1_y = delta_y + mu0_y, tau = delta_y / delta_a.
/// delta_a lands in [0.4, 1.0] by construction.
TrueComponents build_components(const Eigen::MatrixXd& points, const SimConfig& cfg);

/// Threshold rule for treatment uptake given latent confounder U and
/// instrument Z; reproduces E[A | Z=i, X] = mu_i_a exactly.
Eigen::VectorXd gen_treatments(const TrueComponents& truth, const Eigen::VectorXd& latent_u,
                               const Eigen::VectorXd& instrument, const SimConfig& cfg,
                               std::uint64_t seed);

/// Outcome rule whose conditional means reproduce mu_i_y; `confounding`
/// scales the latent-confounder term.
Eigen::VectorXd gen_outcomes(const TrueComponents& truth, const Eigen::VectorXd& latent_u,
                             const Eigen::VectorXd& treatment, const SimConfig& cfg,
                             std::uint64_t seed);

struct SimResult {
  Dataset data;            // n rows, oracle_cate populated
  TrueComponents truth;    // surfaces at the n data points, then test points
};

/// Full synthetic pipeline: X ~ N(0,1)^p, joint GP draw over data and test
/// points, then instruments, treatments and outcomes.
SimResult simulate(const SimConfig& cfg,
                   const std::optional<Eigen::MatrixXd>& test_points = std::nullopt);

/// Semi-synthetic generator: five standard-normal covariates, Z ~ Bern(0.5),
/// closed-form surfaces driven by the first covariate, oracle CATE x1^2/0.7.
SimResult semi_synthetic(const SimConfig& cfg);

struct McBinCheck {
  double empirical = 0.0;
  double expected = 0.0;
  double standard_error = 0.0;
  bool pass = false;
};

struct McBinResult {
  Eigen::RowVectorXd point;
  McBinCheck treat[2];    // E[A | Z=0/1, X]
  McBinCheck outcome[2];  // E[Y | Z=0/1, X]
  bool pass = false;
};

struct McVerifyReport {
  std::vector<McBinResult> bins;
  double bin_pass_fraction = 0.0;
  bool pass = false;
};

/// Monte-Carlo self-verification: at fixed covariate bins, draws m
/// conditional samples and compares binned E[A|Z,X] and E[Y|Z,X] against the
/// constructed surfaces at 3 standard errors. Passes when at least 95% of
/// bins pass all four checks.
McVerifyReport mc_verify(const SimConfig& cfg, int bins, int m);

/// Same check with explicit surfaces: draws are generated from
/// `generation_truth` and compared against `reference_truth` (used for
/// negative controls).
McVerifyReport mc_verify_at(const TrueComponents& generation_truth,
                            const TrueComponents& reference_truth, const SimConfig& cfg, int m,
                            std::uint64_t seed);

}  // namespace mriv
