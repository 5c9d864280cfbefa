#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mriv/dataset.hpp"
#include "mriv/regress.hpp"

namespace mriv {

/// A fitted surface: covariate rows in, one real per row out.
using SurfaceFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

/// Runtime guards for the denominators and the initial CATE estimate.
struct ClipConfig {
  double delta_floor = 0.05;              // minimum |delta_a|
  double propensity_eps = 0.01;           // propensity kept inside [eps, 1-eps]
  std::optional<double> tau_cap;          // cap on |tau_init|; disabled by default

  /// sign(v) * max(|v|, floor), with sign(0) treated as +1.
  double clip_delta(double v) const {
    const double sign = v < 0.0 ? -1.0 : 1.0;
    const double mag = v < 0.0 ? -v : v;
    return sign * (mag < delta_floor ? delta_floor : mag);
  }

  double clip_propensity(double v) const {
    if (v < propensity_eps) return propensity_eps;
    if (v > 1.0 - propensity_eps) return 1.0 - propensity_eps;
    return v;
  }

  double clip_tau(double v) const {
    if (!tau_cap) return v;
    if (v > *tau_cap) return *tau_cap;
    if (v < -*tau_cap) return -*tau_cap;
    return v;
  }
};

/// Stage-1 nuisance surfaces. Propensity and instrument-strength evaluators
/// come pre-clipped; clipping is idempotent so consumers may re-apply it.
struct NuisanceSet {
  SurfaceFn pi_hat;       // P(Z=1 | X)
  SurfaceFn mu0_y_hat;    // E[Y | X, Z=0]
  SurfaceFn mu0_a_hat;    // E[A | X, Z=0]
  SurfaceFn delta_a_hat;  // E[A | X, Z=1] - E[A | X, Z=0]
  SurfaceFn mu1_y_hat;    // E[Y | X, Z=1] (for plug-in / initial estimators)
  SurfaceFn mu1_a_hat;    // E[A | X, Z=1]
};

/// Backend choice per nuisance role.
struct NuisanceSpecs {
  RegressorSpec propensity;
  RegressorSpec outcome;
  RegressorSpec treatment;

  static NuisanceSpecs uniform(const RegressorSpec& spec) { return {spec, spec, spec}; }
};

/// Fits the Stage-1 nuisances: propensity on the full sample, outcome and
/// treatment models per instrument arm.
NuisanceSet estimate_nuisances(const Dataset& train, const NuisanceSpecs& specs,
                               const ClipConfig& clip);

/// Plug-in CATE closure (mu1_y - mu0_y) / clip(mu1_a - mu0_a), with the
/// optional tau cap applied.
SurfaceFn wald_plugin_surface(const NuisanceSet& nuis, const ClipConfig& clip);

/// Multiply robust pseudo outcome for one observation.
double mr_pseudo_outcome(const Eigen::RowVectorXd& x, double z, double a, double y,
                         const NuisanceSet& nuis, const SurfaceFn& tau_init,
                         const ClipConfig& clip);

/// Batched pseudo outcomes for every row of the dataset.
Eigen::VectorXd mr_pseudo_outcomes(const Dataset& rows, const NuisanceSet& nuis,
                                   const SurfaceFn& tau_init, const ClipConfig& clip);

/// Doubly robust pseudo outcome of the unconfoundedness meta-learner;
/// prop_hat is the treatment propensity P(A=1 | X), clamped at eps.
double dr_pseudo_outcome(double a, double y, double mu1_hat, double mu0_hat, double prop_hat,
                         double eps);

/// Pseudo outcome of the instrument meta-learner baseline; the denominator
/// f_hat - p_hat * pi_hat is kept away from zero by delta_floor.
double driv_pseudo_outcome(double z, double a, double y, double q_hat, double p_hat,
                           double pi_hat, double f_hat, double tau_init, double delta_floor);

/// Fitted CATE predictor together with how it was produced.
struct CateEstimator {
  std::string kind;
  SurfaceFn predict_fn;
  Eigen::Index input_dim = 0;
  std::string provenance;
};

Eigen::VectorXd predict_cate(const CateEstimator& e, const Eigen::MatrixXd& X);

/// Two-stage meta-learner, fit on the full training sample. The initial CATE
/// estimator defaults to the plug-in built from the same Stage-1 fits.
CateEstimator fit_mriv(const Dataset& train, const NuisanceSpecs& specs,
                       const RegressorSpec& stage2_spec, const ClipConfig& clip);

/// Same, with an injected initial CATE estimator.
CateEstimator fit_mriv(const Dataset& train, const SurfaceFn& tau_init,
                       const NuisanceSpecs& specs, const RegressorSpec& stage2_spec,
                       const ClipConfig& clip);

/// Second stage only: regress the pseudo outcomes built from the given
/// nuisances (e.g. network heads or oracle surfaces) on the covariates.
CateEstimator fit_mriv_with_nuisances(const Dataset& train, const NuisanceSet& nuis,
                                      const SurfaceFn& tau_init, const RegressorSpec& stage2_spec,
                                      const ClipConfig& clip);

/// Deterministic three-fold partition used by the cross-fitted estimator.
std::vector<std::vector<Eigen::Index>> crossfit_folds(Eigen::Index n, std::uint64_t seed);

struct CrossfitEstimator {
  CateEstimator combined;
  std::vector<CateEstimator> rotations;                 // one per fold rotation
  std::vector<std::vector<Eigen::Index>> folds;         // the partition used
  std::vector<int> regression_fold_per_rotation;
};

/// Appendix-style cross-fitting: initial estimator and control-arm nuisances
/// on one fold, instrument strength and propensity on the next, pseudo
/// regression on the third; rotated so each fold hosts the regression once;
/// predictions are averaged.
CrossfitEstimator fit_mriv_crossfit(const Dataset& d, const NuisanceSpecs& specs,
                                    const RegressorSpec& stage2_spec, const ClipConfig& clip,
                                    std::uint64_t seed);

/// Plug-in estimator from arm-wise component fits.
CateEstimator fit_wald(const Dataset& train, const NuisanceSpecs& specs, const ClipConfig& clip);

/// Difference of outcome regressions fit per treatment arm (assumes
/// unconfoundedness; biased under confounding by construction).
CateEstimator fit_tlearner(const Dataset& train, const RegressorSpec& outcome_spec);

/// Pseudo-outcome meta-learner under unconfoundedness, for reference.
CateEstimator fit_drlearner(const Dataset& train, const NuisanceSpecs& specs,
                            const RegressorSpec& stage2_spec, const ClipConfig& clip);

/// Instrument meta-learner baseline (reference implementation; see README
/// for the exact pseudo-outcome convention used).
CateEstimator fit_driv(const Dataset& train, const NuisanceSpecs& specs,
                       const RegressorSpec& stage2_spec, const ClipConfig& clip);

}  // namespace mriv
