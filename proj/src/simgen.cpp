#include "mriv/simgen.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

namespace mriv {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

constexpr double kJitterBase = 1e-8;
constexpr double kJitterEscalated = 1e-6;

}  // namespace

double matern_distance(double d, const MaternParams& prm) {
  if (!(prm.lengthscale > 0.0) || !(prm.nu > 0.0)) {
    throw std::invalid_argument("matern: lengthscale and nu must be positive");
  }
  const double r = d / prm.lengthscale;
  if (r < 1e-12) return 1.0;
  const double nu = prm.nu;
  if (nu == 0.5) {
    return std::exp(-r);
  }
  if (nu == 1.5) {
    const double t = std::sqrt(3.0) * r;
    return (1.0 + t) * std::exp(-t);
  }
  if (nu == 2.5) {
    const double t = std::sqrt(5.0) * r;
    return (1.0 + t + 5.0 * r * r / 3.0) * std::exp(-t);
  }
  if (nu >= 10.0) {
    return std::exp(-0.5 * r * r);
  }
  const double t = std::sqrt(2.0 * nu) * r;
  return std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(t, nu) * std::cyl_bessel_k(nu, t);
}

double matern(const Eigen::RowVectorXd& x1, const Eigen::RowVectorXd& x2,
              const MaternParams& prm) {
  if (x1.size() != x2.size()) throw std::invalid_argument("matern: dimension mismatch");
  if (!x1.allFinite() || !x2.allFinite()) throw std::invalid_argument("matern: non-finite point");
  return matern_distance((x1 - x2).norm(), prm);
}

GpSampler::GpSampler(const Eigen::MatrixXd& points, const MaternParams& prm) {
  const Eigen::Index m = points.rows();
  if (m < 1) throw std::invalid_argument("sample_gp: need at least one point");
  Eigen::MatrixXd K(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    K(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double v = matern_distance((points.row(i) - points.row(j)).norm(), prm);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  for (double jitter : {kJitterBase, kJitterEscalated}) {
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(Kj);
    if (llt.info() == Eigen::Success) {
      chol_ = llt.matrixL();
      jitter_ = jitter;
      return;
    }
  }
  throw std::runtime_error("GP kernel factorization failed even with jitter 1e-6");
}

Eigen::VectorXd GpSampler::draw(rng::Stream& stream) const {
  Eigen::VectorXd z(chol_.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = stream.normal();
  return chol_ * z;
}

GpDraw sample_gp(const Eigen::MatrixXd& points, const MaternParams& prm, std::uint64_t seed) {
  GpSampler sampler(points, prm);
  rng::Stream stream(rng::derive(seed, "gp-draw"));
  return GpDraw{points, sampler.draw(stream)};
}

TrueComponents build_components(const Eigen::MatrixXd& points, const SimConfig& cfg) {
  const double ell = cfg.lengthscale;
  const double nu_g = cfg.nu_propensity.value_or(cfg.nu_treatment);

  GpSampler treat_sampler(points, {ell, cfg.nu_treatment});
  rng::Stream s_f1(rng::derive(cfg.seed, "gp-f1"));
  rng::Stream s_f0(rng::derive(cfg.seed, "gp-f0"));
  Eigen::VectorXd f1 = treat_sampler.draw(s_f1);
  Eigen::VectorXd f0 = treat_sampler.draw(s_f0);

  rng::Stream s_g(rng::derive(cfg.seed, "gp-g"));
  Eigen::VectorXd g;
  if (nu_g == cfg.nu_treatment) {
    g = treat_sampler.draw(s_g);
  } else {
    g = GpSampler(points, {ell, nu_g}).draw(s_g);
  }

  rng::Stream s_dy(rng::derive(cfg.seed, "gp-delta-y"));
  Eigen::VectorXd delta_y = GpSampler(points, {ell, cfg.nu_delta_y}).draw(s_dy);
  rng::Stream s_m0(rng::derive(cfg.seed, "gp-mu0-y"));
  Eigen::VectorXd mu0_y = GpSampler(points, {ell, cfg.nu_mu0_y}).draw(s_m0);

  TrueComponents t;
  t.points = points;
  t.delta_y = delta_y;
  t.mu0_y = mu0_y;
  t.mu1_y = delta_y + mu0_y;
  t.mu1_a = f1.unaryExpr([](double v) { return 0.3 * sigmoid(v) + 0.7; });
  t.mu0_a = f0.unaryExpr([](double v) { return 0.3 * sigmoid(v); });
  t.pi = g.unaryExpr([](double v) { return sigmoid(v); });
  t.delta_a = t.mu1_a - t.mu0_a;
  t.tau = t.delta_y.cwiseQuotient(t.delta_a);
  return t;
}

Eigen::VectorXd gen_treatments(const TrueComponents& truth, const Eigen::VectorXd& latent_u,
                               const Eigen::VectorXd& instrument, const SimConfig& cfg,
                               std::uint64_t seed) {
  const Eigen::Index n = latent_u.size();
  if (instrument.size() != n || truth.size() < n) {
    throw std::invalid_argument("gen_treatments: length mismatch");
  }
  const double scale = std::sqrt(cfg.noise_a_sd * cfg.noise_a_sd + cfg.noise_u_sd * cfg.noise_u_sd);
  rng::Stream stream(rng::derive(seed, "treatment-noise"));
  Eigen::VectorXd a(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eps_a = cfg.noise_a_sd * stream.normal();
    const double mu = instrument[i] == 1.0 ? truth.mu1_a[i] : truth.mu0_a[i];
    const double threshold = rng::norm_quantile(1.0 - mu) * scale;
    a[i] = latent_u[i] + eps_a > threshold ? 1.0 : 0.0;
  }
  return a;
}

Eigen::VectorXd gen_outcomes(const TrueComponents& truth, const Eigen::VectorXd& latent_u,
                             const Eigen::VectorXd& treatment, const SimConfig& cfg,
                             std::uint64_t seed) {
  const Eigen::Index n = latent_u.size();
  if (treatment.size() != n || truth.size() < n) {
    throw std::invalid_argument("gen_outcomes: length mismatch");
  }
  rng::Stream stream(rng::derive(seed, "outcome-noise"));
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m1y = truth.mu1_y[i], m0y = truth.mu0_y[i];
    const double m1a = truth.mu1_a[i], m0a = truth.mu0_a[i];
    const double da = truth.delta_a[i];
    const double treated_mean = ((m1a - 1.0) * m0y - m0a * m1y + m1y) / da;
    const double control_mean = (m1a * m0y - m0a * m1y) / da;
    const double eps_y = cfg.noise_y_sd * stream.normal();
    y[i] = (treatment[i] == 1.0 ? treated_mean : control_mean) +
           cfg.confounding * latent_u[i] + eps_y;
  }
  return y;
}

SimResult simulate(const SimConfig& cfg, const std::optional<Eigen::MatrixXd>& test_points) {
  if (cfg.n < 2 || cfg.p < 1) throw std::invalid_argument("simulate: need n >= 2 and p >= 1");
  const Eigen::Index n_extra = test_points ? test_points->rows() : 0;
  if (test_points && test_points->cols() != cfg.p) {
    throw std::invalid_argument("simulate: test point dimension mismatch");
  }

  rng::Stream x_stream(rng::derive(cfg.seed, "covariates"));
  Eigen::MatrixXd all_points(cfg.n + n_extra, cfg.p);
  for (Eigen::Index i = 0; i < cfg.n; ++i) {
    for (Eigen::Index j = 0; j < cfg.p; ++j) all_points(i, j) = x_stream.normal();
  }
  if (n_extra > 0) all_points.bottomRows(n_extra) = *test_points;

  TrueComponents truth = build_components(all_points, cfg);

  rng::Stream u_stream(rng::derive(cfg.seed, "latent-confounder"));
  rng::Stream z_stream(rng::derive(cfg.seed, "instrument"));
  Eigen::VectorXd latent_u(cfg.n), z(cfg.n);
  for (Eigen::Index i = 0; i < cfg.n; ++i) {
    latent_u[i] = cfg.noise_u_sd * u_stream.normal();
    z[i] = z_stream.bernoulli(truth.pi[i]) ? 1.0 : 0.0;
  }
  Eigen::VectorXd a = gen_treatments(truth, latent_u, z, cfg, rng::derive(cfg.seed, "treatments"));
  Eigen::VectorXd y = gen_outcomes(truth, latent_u, a, cfg, rng::derive(cfg.seed, "outcomes"));

  SimResult result;
  result.data.covariates = all_points.topRows(cfg.n);
  result.data.instrument = z;
  result.data.treatment = a;
  result.data.outcome = y;
  result.data.oracle_cate = truth.tau.head(cfg.n);
  result.truth = std::move(truth);
  require_valid(result.data);
  return result;
}

SimResult semi_synthetic(const SimConfig& cfg) {
  if (cfg.n < 10) throw std::invalid_argument("semi_synthetic: need n >= 10");
  const Eigen::Index p = 5;

  rng::Stream x_stream(rng::derive(cfg.seed, "covariates"));
  Eigen::MatrixXd x(cfg.n, p);
  for (Eigen::Index i = 0; i < cfg.n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = x_stream.normal();
  }

  TrueComponents truth;
  truth.points = x;
  truth.mu1_a.resize(cfg.n);
  truth.mu0_a.resize(cfg.n);
  truth.mu1_y.resize(cfg.n);
  truth.mu0_y.resize(cfg.n);
  truth.pi = Eigen::VectorXd::Constant(cfg.n, 0.5);
  for (Eigen::Index i = 0; i < cfg.n; ++i) {
    const double x1 = x(i, 0);
    const double rest = x.row(i).tail(p - 1).array().square().sum();
    truth.mu1_a[i] = 0.3 * sigmoid(x1) + 0.7;
    truth.mu0_a[i] = 0.3 * sigmoid(x1);
    truth.mu1_y[i] = 0.5 * x1 * x1 + rest;
    truth.mu0_y[i] = -0.5 * x1 * x1 + rest;
  }
  truth.delta_a = truth.mu1_a - truth.mu0_a;  // constant 0.7
  truth.delta_y = truth.mu1_y - truth.mu0_y;
  truth.tau = truth.delta_y.cwiseQuotient(truth.delta_a);

  rng::Stream u_stream(rng::derive(cfg.seed, "latent-confounder"));
  rng::Stream z_stream(rng::derive(cfg.seed, "instrument"));
  Eigen::VectorXd latent_u(cfg.n), z(cfg.n);
  for (Eigen::Index i = 0; i < cfg.n; ++i) {
    latent_u[i] = cfg.noise_u_sd * u_stream.normal();
    z[i] = z_stream.bernoulli(0.5) ? 1.0 : 0.0;
  }
  Eigen::VectorXd a = gen_treatments(truth, latent_u, z, cfg, rng::derive(cfg.seed, "treatments"));
  Eigen::VectorXd y = gen_outcomes(truth, latent_u, a, cfg, rng::derive(cfg.seed, "outcomes"));

  SimResult result;
  result.data.covariates = x;
  result.data.instrument = z;
  result.data.treatment = a;
  result.data.outcome = y;
  result.data.oracle_cate = truth.tau;
  result.truth = std::move(truth);
  require_valid(result.data);
  return result;
}

McVerifyReport mc_verify_at(const TrueComponents& generation_truth,
                            const TrueComponents& reference_truth, const SimConfig& cfg, int m,
                            std::uint64_t seed) {
  if (m < 10000) throw std::invalid_argument("mc_verify: need at least 1e4 draws per bin");
  if (generation_truth.size() != reference_truth.size()) {
    throw std::invalid_argument("mc_verify: truth size mismatch");
  }
  McVerifyReport report;
  const Eigen::Index nbins = generation_truth.size();
  int passed = 0;

  for (Eigen::Index b = 0; b < nbins; ++b) {
    // Conditional draws at the fixed covariate point b.
    rng::Stream u_stream(rng::derive(seed, "mc-latent", static_cast<std::uint64_t>(b)));
    rng::Stream z_stream(rng::derive(seed, "mc-instrument", static_cast<std::uint64_t>(b)));
    TrueComponents cell;
    cell.points = generation_truth.points.row(b);
    cell.mu1_y = generation_truth.mu1_y.segment(b, 1);
    cell.mu0_y = generation_truth.mu0_y.segment(b, 1);
    cell.mu1_a = generation_truth.mu1_a.segment(b, 1);
    cell.mu0_a = generation_truth.mu0_a.segment(b, 1);
    cell.pi = generation_truth.pi.segment(b, 1);
    cell.delta_a = generation_truth.delta_a.segment(b, 1);
    cell.delta_y = generation_truth.delta_y.segment(b, 1);
    cell.tau = generation_truth.tau.segment(b, 1);

    double count[2] = {0, 0};
    double sum_a[2] = {0, 0};
    double sum_y[2] = {0, 0};
    double sum_y2[2] = {0, 0};
    Eigen::VectorXd u1(1), z1(1);
    for (int r = 0; r < m; ++r) {
      u1[0] = cfg.noise_u_sd * u_stream.normal();
      const int zi = z_stream.bernoulli(cell.pi[0]) ? 1 : 0;
      z1[0] = zi;
      Eigen::VectorXd a = gen_treatments(cell, u1, z1, cfg,
                                         rng::derive(seed, "mc-treat", static_cast<std::uint64_t>(b * 1000003 + r)));
      Eigen::VectorXd y = gen_outcomes(cell, u1, a, cfg,
                                       rng::derive(seed, "mc-outcome", static_cast<std::uint64_t>(b * 1000003 + r)));
      count[zi] += 1.0;
      sum_a[zi] += a[0];
      sum_y[zi] += y[0];
      sum_y2[zi] += y[0] * y[0];
    }

    McBinResult bin;
    bin.point = generation_truth.points.row(b);
    bin.pass = true;
    for (int zi = 0; zi < 2; ++zi) {
      const double n_arm = count[zi];
      const double mu_a_ref = zi == 1 ? reference_truth.mu1_a[b] : reference_truth.mu0_a[b];
      const double mu_y_ref = zi == 1 ? reference_truth.mu1_y[b] : reference_truth.mu0_y[b];

      McBinCheck& ca = bin.treat[zi];
      ca.expected = mu_a_ref;
      ca.empirical = n_arm > 0 ? sum_a[zi] / n_arm : 0.0;
      ca.standard_error = n_arm > 0 ? std::sqrt(std::max(mu_a_ref * (1.0 - mu_a_ref), 1e-12) / n_arm)
                                    : 0.0;
      ca.pass = n_arm > 0 && std::fabs(ca.empirical - ca.expected) <= 3.0 * ca.standard_error;

      McBinCheck& cy = bin.outcome[zi];
      cy.expected = mu_y_ref;
      cy.empirical = n_arm > 0 ? sum_y[zi] / n_arm : 0.0;
      const double var = n_arm > 1 ? (sum_y2[zi] - n_arm * cy.empirical * cy.empirical) / (n_arm - 1.0)
                                   : 0.0;
      cy.standard_error = n_arm > 0 ? std::sqrt(std::max(var, 1e-12) / n_arm) : 0.0;
      cy.pass = n_arm > 0 && std::fabs(cy.empirical - cy.expected) <= 3.0 * cy.standard_error;

      bin.pass = bin.pass && ca.pass && cy.pass;
    }
    if (bin.pass) ++passed;
    report.bins.push_back(std::move(bin));
  }

  report.bin_pass_fraction = nbins > 0 ? static_cast<double>(passed) / static_cast<double>(nbins) : 1.0;
  report.pass = report.bin_pass_fraction >= 0.95;
  return report;
}

McVerifyReport mc_verify(const SimConfig& cfg, int bins, int m) {
  if (bins < 1) throw std::invalid_argument("mc_verify: need at least one bin");
  Eigen::MatrixXd points(bins, cfg.p);
  if (cfg.p == 1) {
    for (int b = 0; b < bins; ++b) {
      points(b, 0) = bins == 1 ? 0.0 : -2.0 + 4.0 * static_cast<double>(b) / (bins - 1);
    }
  } else {
    rng::Stream s(rng::derive(cfg.seed, "mc-bins"));
    for (int b = 0; b < bins; ++b) {
      for (Eigen::Index j = 0; j < cfg.p; ++j) points(b, j) = s.normal();
    }
  }
  TrueComponents truth = build_components(points, cfg);
  return mc_verify_at(truth, truth, cfg, m, rng::derive(cfg.seed, "mc-verify"));
}

}  // namespace mriv
