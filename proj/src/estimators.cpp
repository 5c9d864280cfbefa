#include "mriv/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "mriv/rng.hpp"

namespace mriv {

namespace {

struct ArmData {
  Eigen::MatrixXd x;
  Eigen::VectorXd a;
  Eigen::VectorXd y;
};

ArmData instrument_arm(const Dataset& d, int z) {
  auto idx = d.arm_indices(z);
  if (idx.empty()) {
    throw std::runtime_error("instrument arm z=" + std::to_string(z) + " is empty");
  }
  Dataset sub = d.subset(idx);
  return {std::move(sub.covariates), std::move(sub.treatment), std::move(sub.outcome)};
}

SurfaceFn regressor_surface(FittedRegressor model) {
  return [model = std::move(model)](const Eigen::MatrixXd& X) { return model.predict(X); };
}

SurfaceFn classifier_surface(FittedClassifier model) {
  return [model = std::move(model)](const Eigen::MatrixXd& X) { return model.predict_proba(X); };
}

}  // namespace

NuisanceSet estimate_nuisances(const Dataset& train, const NuisanceSpecs& specs,
                               const ClipConfig& clip) {
  require_valid(train);
  ArmData arm1 = instrument_arm(train, 1);
  ArmData arm0 = instrument_arm(train, 0);

  auto pi_model = fit_classifier(specs.propensity.with_seed(rng::derive(specs.propensity.seed, "pi")),
                                 train.covariates, train.instrument);
  auto mu0y_model = fit_regressor(specs.outcome.with_seed(rng::derive(specs.outcome.seed, "mu0-y")),
                                  arm0.x, arm0.y);
  auto mu1y_model = fit_regressor(specs.outcome.with_seed(rng::derive(specs.outcome.seed, "mu1-y")),
                                  arm1.x, arm1.y);
  auto mu0a_model = fit_classifier(specs.treatment.with_seed(rng::derive(specs.treatment.seed, "mu0-a")),
                                   arm0.x, arm0.a);
  auto mu1a_model = fit_classifier(specs.treatment.with_seed(rng::derive(specs.treatment.seed, "mu1-a")),
                                   arm1.x, arm1.a);

  NuisanceSet nuis;
  nuis.mu0_y_hat = regressor_surface(std::move(mu0y_model));
  nuis.mu1_y_hat = regressor_surface(std::move(mu1y_model));
  nuis.mu0_a_hat = classifier_surface(mu0a_model);
  nuis.mu1_a_hat = classifier_surface(mu1a_model);
  nuis.pi_hat = [pi_model, clip](const Eigen::MatrixXd& X) {
    Eigen::VectorXd p = pi_model.predict_proba(X);
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = clip.clip_propensity(p[i]);
    return p;
  };
  nuis.delta_a_hat = [mu1a_model, mu0a_model, clip](const Eigen::MatrixXd& X) {
    Eigen::VectorXd d = mu1a_model.predict_proba(X) - mu0a_model.predict_proba(X);
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = clip.clip_delta(d[i]);
    return d;
  };
  return nuis;
}

SurfaceFn wald_plugin_surface(const NuisanceSet& nuis, const ClipConfig& clip) {
  if (!nuis.mu1_y_hat || !nuis.mu1_a_hat) {
    throw std::invalid_argument("wald plug-in needs mu1_y and mu1_a estimates");
  }
  return [nuis, clip](const Eigen::MatrixXd& X) {
    Eigen::VectorXd num = nuis.mu1_y_hat(X) - nuis.mu0_y_hat(X);
    Eigen::VectorXd den = nuis.mu1_a_hat(X) - nuis.mu0_a_hat(X);
    Eigen::VectorXd out(num.size());
    for (Eigen::Index i = 0; i < num.size(); ++i) {
      out[i] = clip.clip_tau(num[i] / clip.clip_delta(den[i]));
    }
    return out;
  };
}

Eigen::VectorXd mr_pseudo_outcomes(const Dataset& rows, const NuisanceSet& nuis,
                                   const SurfaceFn& tau_init, const ClipConfig& clip) {
  const Eigen::MatrixXd& X = rows.covariates;
  Eigen::VectorXd pi = nuis.pi_hat(X);
  Eigen::VectorXd mu0y = nuis.mu0_y_hat(X);
  Eigen::VectorXd mu0a = nuis.mu0_a_hat(X);
  Eigen::VectorXd delta = nuis.delta_a_hat(X);
  Eigen::VectorXd tau0 = tau_init(X);

  Eigen::VectorXd out(rows.n());
  for (Eigen::Index i = 0; i < rows.n(); ++i) {
    const double z = rows.instrument[i];
    const double a = rows.treatment[i];
    const double y = rows.outcome[i];
    const double p = clip.clip_propensity(pi[i]);
    const double d = clip.clip_delta(delta[i]);
    const double t0 = clip.clip_tau(tau0[i]);
    const double arm_prob = z * p + (1.0 - z) * (1.0 - p);
    const double residual = y - (mu0y[i] + t0 * (a - mu0a[i]));
    out[i] = (2.0 * z - 1.0) / d * residual / arm_prob + t0;
  }
  return out;
}

double mr_pseudo_outcome(const Eigen::RowVectorXd& x, double z, double a, double y,
                         const NuisanceSet& nuis, const SurfaceFn& tau_init,
                         const ClipConfig& clip) {
  Dataset row;
  row.covariates = x;
  row.instrument = Eigen::VectorXd::Constant(1, z);
  row.treatment = Eigen::VectorXd::Constant(1, a);
  row.outcome = Eigen::VectorXd::Constant(1, y);
  return mr_pseudo_outcomes(row, nuis, tau_init, clip)[0];
}

double dr_pseudo_outcome(double a, double y, double mu1_hat, double mu0_hat, double prop_hat,
                         double eps) {
  if (prop_hat < eps) prop_hat = eps;
  if (prop_hat > 1.0 - eps) prop_hat = 1.0 - eps;
  const double w1 = a / prop_hat;
  const double w0 = (1.0 - a) / (1.0 - prop_hat);
  return (w1 - w0) * y + (1.0 - w1) * mu1_hat - (1.0 - w0) * mu0_hat;
}

double driv_pseudo_outcome(double z, double a, double y, double q_hat, double p_hat,
                           double pi_hat, double f_hat, double tau_init, double delta_floor) {
  double denom = f_hat - p_hat * pi_hat;
  const double sign = denom < 0.0 ? -1.0 : 1.0;
  if (std::fabs(denom) < delta_floor) denom = sign * delta_floor;
  const double residual = y - q_hat - tau_init * (a - p_hat);
  return tau_init + residual * (z - pi_hat) / denom;
}

Eigen::VectorXd predict_cate(const CateEstimator& e, const Eigen::MatrixXd& X) {
  if (!e.predict_fn) throw std::logic_error("predict on an unfitted CATE estimator");
  if (X.cols() != e.input_dim) {
    throw std::invalid_argument("dimension mismatch: estimator expects p=" +
                                std::to_string(e.input_dim));
  }
  Eigen::VectorXd out = e.predict_fn(X);
  if (!out.allFinite()) throw std::runtime_error("non-finite CATE prediction");
  return out;
}

CateEstimator fit_mriv_with_nuisances(const Dataset& train, const NuisanceSet& nuis,
                                      const SurfaceFn& tau_init, const RegressorSpec& stage2_spec,
                                      const ClipConfig& clip) {
  Eigen::VectorXd pseudo = mr_pseudo_outcomes(train, nuis, tau_init, clip);
  auto stage2 = fit_regressor(stage2_spec.with_seed(rng::derive(stage2_spec.seed, "stage2")),
                              train.covariates, pseudo);
  CateEstimator est;
  est.kind = "mriv";
  est.input_dim = train.p();
  est.predict_fn = regressor_surface(std::move(stage2));
  est.provenance = "stage2=" + to_string(stage2_spec.variant);
  return est;
}

CateEstimator fit_mriv(const Dataset& train, const SurfaceFn& tau_init,
                       const NuisanceSpecs& specs, const RegressorSpec& stage2_spec,
                       const ClipConfig& clip) {
  NuisanceSet nuis = estimate_nuisances(train, specs, clip);
  CateEstimator est = fit_mriv_with_nuisances(train, nuis, tau_init, stage2_spec, clip);
  est.provenance += ",init=injected";
  return est;
}

CateEstimator fit_mriv(const Dataset& train, const NuisanceSpecs& specs,
                       const RegressorSpec& stage2_spec, const ClipConfig& clip) {
  NuisanceSet nuis = estimate_nuisances(train, specs, clip);
  SurfaceFn tau_init = wald_plugin_surface(nuis, clip);
  CateEstimator est = fit_mriv_with_nuisances(train, nuis, tau_init, stage2_spec, clip);
  est.provenance += ",init=wald-plugin";
  return est;
}

std::vector<std::vector<Eigen::Index>> crossfit_folds(Eigen::Index n, std::uint64_t seed) {
  if (n < 3) throw std::invalid_argument("crossfit needs n >= 3");
  rng::Stream stream(rng::derive(seed, "crossfit-folds"));
  auto perm = stream.permutation(static_cast<std::size_t>(n));
  std::vector<std::vector<Eigen::Index>> folds(3);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    folds[i % 3].push_back(static_cast<Eigen::Index>(perm[i]));
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

CrossfitEstimator fit_mriv_crossfit(const Dataset& d, const NuisanceSpecs& specs,
                                    const RegressorSpec& stage2_spec, const ClipConfig& clip,
                                    std::uint64_t seed) {
  require_valid(d);
  if (d.n() < 30) throw std::invalid_argument("crossfit needs n >= 30");

  CrossfitEstimator result;
  result.folds = crossfit_folds(d.n(), seed);

  for (int r = 0; r < 3; ++r) {
    const auto& init_fold = result.folds[static_cast<std::size_t>(r)];
    const auto& strength_fold = result.folds[static_cast<std::size_t>((r + 1) % 3)];
    const auto& regression_fold = result.folds[static_cast<std::size_t>((r + 2) % 3)];
    result.regression_fold_per_rotation.push_back((r + 2) % 3);

    Dataset d_init = d.subset(init_fold);
    Dataset d_strength = d.subset(strength_fold);
    Dataset d_reg = d.subset(regression_fold);

    // tau_init, mu0_y, mu0_a come from the first fold; delta_a and pi from
    // the second. Arm-wise component fits on the first fold also provide the
    // plug-in initial estimator.
    NuisanceSpecs init_specs = specs;
    const auto rtag = static_cast<std::uint64_t>(r);
    init_specs.outcome.seed = rng::derive(specs.outcome.seed, "cf-init", rtag);
    init_specs.treatment.seed = rng::derive(specs.treatment.seed, "cf-init", rtag);
    init_specs.propensity.seed = rng::derive(specs.propensity.seed, "cf-init", rtag);
    NuisanceSet init_fits = estimate_nuisances(d_init, init_specs, clip);

    NuisanceSpecs strength_specs = specs;
    strength_specs.outcome.seed = rng::derive(specs.outcome.seed, "cf-strength", rtag);
    strength_specs.treatment.seed = rng::derive(specs.treatment.seed, "cf-strength", rtag);
    strength_specs.propensity.seed = rng::derive(specs.propensity.seed, "cf-strength", rtag);
    NuisanceSet strength_fits = estimate_nuisances(d_strength, strength_specs, clip);

    NuisanceSet combined;
    combined.mu0_y_hat = init_fits.mu0_y_hat;
    combined.mu0_a_hat = init_fits.mu0_a_hat;
    combined.mu1_y_hat = init_fits.mu1_y_hat;
    combined.mu1_a_hat = init_fits.mu1_a_hat;
    combined.delta_a_hat = strength_fits.delta_a_hat;
    combined.pi_hat = strength_fits.pi_hat;
    SurfaceFn tau_init = wald_plugin_surface(init_fits, clip);

    RegressorSpec stage2 = stage2_spec.with_seed(rng::derive(stage2_spec.seed, "cf-stage2", rtag));
    CateEstimator rot = fit_mriv_with_nuisances(d_reg, combined, tau_init, stage2, clip);
    rot.kind = "mriv-crossfit-rotation";
    result.rotations.push_back(std::move(rot));
  }

  std::vector<SurfaceFn> parts;
  for (const auto& rot : result.rotations) parts.push_back(rot.predict_fn);
  result.combined.kind = "mriv-crossfit";
  result.combined.input_dim = d.p();
  result.combined.provenance = "stage2=" + to_string(stage2_spec.variant) + ",init=wald-plugin";
  result.combined.predict_fn = [parts](const Eigen::MatrixXd& X) {
    Eigen::VectorXd sum = parts[0](X);
    for (std::size_t k = 1; k < parts.size(); ++k) sum += parts[k](X);
    return (sum / static_cast<double>(parts.size())).eval();
  };
  return result;
}

CateEstimator fit_wald(const Dataset& train, const NuisanceSpecs& specs, const ClipConfig& clip) {
  NuisanceSet nuis = estimate_nuisances(train, specs, clip);
  CateEstimator est;
  est.kind = "wald";
  est.input_dim = train.p();
  est.predict_fn = wald_plugin_surface(nuis, clip);
  est.provenance = "components=" + to_string(specs.outcome.variant);
  return est;
}

CateEstimator fit_tlearner(const Dataset& train, const RegressorSpec& outcome_spec) {
  require_valid(train);
  std::vector<Eigen::Index> treated, control;
  for (Eigen::Index i = 0; i < train.n(); ++i) {
    (train.treatment[i] == 1.0 ? treated : control).push_back(i);
  }
  if (treated.empty() || control.empty()) {
    throw std::runtime_error("t-learner: a treatment arm is empty");
  }
  Dataset d1 = train.subset(treated);
  Dataset d0 = train.subset(control);
  auto m1 = fit_regressor(outcome_spec.with_seed(rng::derive(outcome_spec.seed, "t-mu1")),
                          d1.covariates, d1.outcome);
  auto m0 = fit_regressor(outcome_spec.with_seed(rng::derive(outcome_spec.seed, "t-mu0")),
                          d0.covariates, d0.outcome);
  CateEstimator est;
  est.kind = "t-learner";
  est.input_dim = train.p();
  est.predict_fn = [m1, m0](const Eigen::MatrixXd& X) {
    return (m1.predict(X) - m0.predict(X)).eval();
  };
  est.provenance = "arms=" + to_string(outcome_spec.variant);
  return est;
}

CateEstimator fit_drlearner(const Dataset& train, const NuisanceSpecs& specs,
                            const RegressorSpec& stage2_spec, const ClipConfig& clip) {
  require_valid(train);
  std::vector<Eigen::Index> treated, control;
  for (Eigen::Index i = 0; i < train.n(); ++i) {
    (train.treatment[i] == 1.0 ? treated : control).push_back(i);
  }
  if (treated.empty() || control.empty()) {
    throw std::runtime_error("dr-learner: a treatment arm is empty");
  }
  Dataset d1 = train.subset(treated);
  Dataset d0 = train.subset(control);
  auto m1 = fit_regressor(specs.outcome.with_seed(rng::derive(specs.outcome.seed, "dr-mu1")),
                          d1.covariates, d1.outcome);
  auto m0 = fit_regressor(specs.outcome.with_seed(rng::derive(specs.outcome.seed, "dr-mu0")),
                          d0.covariates, d0.outcome);
  // Treatment propensity (not the instrument propensity) fit on the full
  // training sample.
  auto prop = fit_classifier(specs.propensity.with_seed(rng::derive(specs.propensity.seed, "dr-prop")),
                             train.covariates, train.treatment);

  Eigen::VectorXd mu1 = m1.predict(train.covariates);
  Eigen::VectorXd mu0 = m0.predict(train.covariates);
  Eigen::VectorXd ps = prop.predict_proba(train.covariates);
  Eigen::VectorXd pseudo(train.n());
  for (Eigen::Index i = 0; i < train.n(); ++i) {
    pseudo[i] = dr_pseudo_outcome(train.treatment[i], train.outcome[i], mu1[i], mu0[i], ps[i],
                                  clip.propensity_eps);
  }
  auto stage2 = fit_regressor(stage2_spec.with_seed(rng::derive(stage2_spec.seed, "dr-stage2")),
                              train.covariates, pseudo);
  CateEstimator est;
  est.kind = "dr-learner";
  est.input_dim = train.p();
  est.predict_fn = regressor_surface(std::move(stage2));
  est.provenance = "stage2=" + to_string(stage2_spec.variant);
  return est;
}

CateEstimator fit_driv(const Dataset& train, const NuisanceSpecs& specs,
                       const RegressorSpec& stage2_spec, const ClipConfig& clip) {
  require_valid(train);
  auto q_model = fit_regressor(specs.outcome.with_seed(rng::derive(specs.outcome.seed, "driv-q")),
                               train.covariates, train.outcome);
  auto p_model = fit_classifier(specs.treatment.with_seed(rng::derive(specs.treatment.seed, "driv-p")),
                                train.covariates, train.treatment);
  auto pi_model = fit_classifier(specs.propensity.with_seed(rng::derive(specs.propensity.seed, "driv-pi")),
                                 train.covariates, train.instrument);
  Eigen::VectorXd az = train.treatment.cwiseProduct(train.instrument);
  auto f_model = fit_classifier(specs.treatment.with_seed(rng::derive(specs.treatment.seed, "driv-f")),
                                train.covariates, az);

  // Wald plug-in initial estimator from the same sample.
  NuisanceSet nuis = estimate_nuisances(train, specs, clip);
  SurfaceFn tau_init = wald_plugin_surface(nuis, clip);

  Eigen::VectorXd q = q_model.predict(train.covariates);
  Eigen::VectorXd p = p_model.predict_proba(train.covariates);
  Eigen::VectorXd pi = pi_model.predict_proba(train.covariates);
  Eigen::VectorXd f = f_model.predict_proba(train.covariates);
  Eigen::VectorXd t0 = tau_init(train.covariates);
  Eigen::VectorXd pseudo(train.n());
  for (Eigen::Index i = 0; i < train.n(); ++i) {
    pseudo[i] = driv_pseudo_outcome(train.instrument[i], train.treatment[i], train.outcome[i],
                                    q[i], p[i], clip.clip_propensity(pi[i]), f[i],
                                    clip.clip_tau(t0[i]), clip.delta_floor);
  }
  auto stage2 = fit_regressor(stage2_spec.with_seed(rng::derive(stage2_spec.seed, "driv-stage2")),
                              train.covariates, pseudo);
  CateEstimator est;
  est.kind = "driv";
  est.input_dim = train.p();
  est.predict_fn = regressor_surface(std::move(stage2));
  est.provenance = "stage2=" + to_string(stage2_spec.variant);
  return est;
}

}  // namespace mriv
