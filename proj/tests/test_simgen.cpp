#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mriv/simgen.hpp"

using namespace mriv;

namespace {

Eigen::RowVectorXd pt(double x) {
  Eigen::RowVectorXd p(1);
  p[0] = x;
  return p;
}

// Generic-order route through the modified Bessel function; independent of
// the closed forms used inside matern_distance for half-integer orders.
double matern_via_bessel(double nu, double d, double ell) {
  if (d <= 0) return 1.0;
  const double t = std::sqrt(2.0 * nu) * d / ell;
  return std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(t, nu) * std::cyl_bessel_k(nu, t);
}

}  // namespace

TEST_CASE("matern closed forms match frozen references") {
  // References computed with 40-digit arithmetic.
  CHECK(matern_distance(0.0, {1.0, 0.5}) == 1.0);
  CHECK(matern_distance(0.0, {1.0, 7.3}) == 1.0);
  CHECK(std::fabs(matern_distance(1.0, {1.0, 0.5}) - 0.3678794411714423216) < 1e-12);
  CHECK(std::fabs(matern_distance(1.0, {1.0, 1.5}) - 0.4833577245965076506) < 1e-12);
  CHECK(std::fabs(matern_distance(1.0, {1.0, 2.5}) - 0.52399410883182031059) < 1e-12);
  CHECK(std::fabs(matern_distance(0.4, {2.0, 1.5}) - 0.95221136147723486413) < 1e-12);
  CHECK(std::fabs(matern_distance(2.0, {0.5, 2.5}) - 0.0047770845466984941257) < 1e-12);
}

TEST_CASE("generic orders match the Bessel-function route and frozen values") {
  CHECK(std::fabs(matern_distance(0.5, {1.0, 0.7}) - 0.67201798165479045963) < 1e-12);
  CHECK(std::fabs(matern_distance(1.5, {1.0, 0.7}) - 0.2386858405930186685) < 1e-12);
  CHECK(std::fabs(matern_distance(0.5, {1.0, 2.0}) - 0.81241944931758874141) < 1e-12);
  CHECK(std::fabs(matern_distance(1.5, {1.0, 3.7}) - 0.29301862877552390769) < 1e-12);
  // Half-integer closed forms agree with the generic formula.
  for (double nu : {0.5, 1.5, 2.5}) {
    for (double d : {0.1, 0.8, 2.2}) {
      CHECK(std::fabs(matern_distance(d, {1.0, nu}) - matern_via_bessel(nu, d, 1.0)) < 1e-12);
    }
  }
}

TEST_CASE("matern is symmetric, one at zero distance, and in (0,1]") {
  rng::Stream gen(31);
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::RowVectorXd a(2), b(2);
    a << gen.normal(), gen.normal();
    b << gen.normal(), gen.normal();
    MaternParams prm{0.5 + gen.uniform() * 2.0, 0.3 + gen.uniform() * 4.0};
    const double kab = matern(a, b, prm);
    CHECK(kab == matern(b, a, prm));
    CHECK(matern(a, a, prm) == 1.0);
    CHECK(kab > 0.0);
    CHECK(kab <= 1.0);
  }
}

TEST_CASE("large order approaches the squared-exponential limit") {
  for (double nu : {10.0, 25.0, 80.0}) {
    for (double d = 0.0; d <= 3.0; d += 0.25) {
      const double se = std::exp(-d * d / 2.0);
      CHECK(std::fabs(matern_distance(d, {1.0, nu}) - se) <= 1e-2);
    }
  }
  // Just below the crossover the Bessel route stays close to the limit too.
  CHECK(std::fabs(matern_via_bessel(9.5, 1.0, 1.0) - std::exp(-0.5)) < 2e-2);
}

TEST_CASE("single-point GP draws are standard normal on average") {
  Eigen::MatrixXd point(1, 1);
  point(0, 0) = 0.3;
  double sum = 0.0;
  const int reps = 10000;
  for (int s = 0; s < reps; ++s) {
    sum += sample_gp(point, {1.0, 1.5}, static_cast<std::uint64_t>(s)).values[0];
  }
  CHECK(std::fabs(sum / reps) < 3.0 / 100.0);
}

TEST_CASE("duplicated points give nearly identical draws") {
  Eigen::MatrixXd points(2, 1);
  points(0, 0) = 1.0;
  points(1, 0) = 1.0;
  GpDraw draw = sample_gp(points, {1.0, 1.5}, 5);
  CHECK(std::fabs(draw.values[0] - draw.values[1]) < 1e-3);
}

TEST_CASE("kernel matrices factorize at base jitter") {
  rng::Stream gen(77);
  for (double nu : {0.5, 1.5, 50.0}) {
    Eigen::MatrixXd points(40, 1);
    for (int i = 0; i < 40; ++i) points(i, 0) = gen.normal();
    GpSampler sampler(points, {1.0, nu});
    CHECK(sampler.jitter() == 1e-8);
  }
}

TEST_CASE("constructed components satisfy their invariants") {
  SimConfig cfg;
  cfg.seed = 3;
  rng::Stream gen(4);
  Eigen::MatrixXd points(200, 1);
  for (int i = 0; i < 200; ++i) points(i, 0) = gen.normal();
  TrueComponents t = build_components(points, cfg);

  CHECK_FALSE(check_components(t).has_value());
  CHECK(t.delta_a.minCoeff() >= 0.4);
  CHECK(t.delta_a.maxCoeff() <= 1.0);
  CHECK(t.mu1_a.minCoeff() > 0.7);
  CHECK(t.mu1_a.maxCoeff() < 1.0);
  CHECK(t.mu0_a.minCoeff() > 0.0);
  CHECK(t.mu0_a.maxCoeff() < 0.3);
  CHECK(t.pi.minCoeff() > 0.0);
  CHECK(t.pi.maxCoeff() < 1.0);
  CHECK(wald_identity_check(t) <= 1e-10);
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    CHECK(std::fabs(t.tau[i] * t.delta_a[i] - t.delta_y[i]) <= 1e-10);
    CHECK(std::fabs((t.mu1_y[i] - t.mu0_y[i]) - t.delta_y[i]) <= 1e-12);
  }
}

TEST_CASE("treatment draws reproduce the compliance surfaces") {
  // One fixed point with hand-set surfaces; empirical P(A=1 | Z=i) must match
  // mu_i_a within 3 binomial standard errors.
  TrueComponents cell;
  cell.points = Eigen::MatrixXd::Zero(1, 1);
  cell.mu1_a = Eigen::VectorXd::Constant(1, 0.85);
  cell.mu0_a = Eigen::VectorXd::Constant(1, 0.15);
  cell.mu1_y = Eigen::VectorXd::Constant(1, 1.0);
  cell.mu0_y = Eigen::VectorXd::Constant(1, 0.0);
  cell.pi = Eigen::VectorXd::Constant(1, 0.5);
  cell.delta_a = cell.mu1_a - cell.mu0_a;
  cell.delta_y = cell.mu1_y - cell.mu0_y;
  cell.tau = cell.delta_y.cwiseQuotient(cell.delta_a);

  SimConfig cfg;
  const int m = 100000;
  rng::Stream u_stream(101);
  Eigen::VectorXd u1(1), z1(1);
  double count[2] = {0, 0}, hits[2] = {0, 0};
  for (int r = 0; r < m; ++r) {
    u1[0] = cfg.noise_u_sd * u_stream.normal();
    const int z = r % 2;
    z1[0] = z;
    Eigen::VectorXd a = gen_treatments(cell, u1, z1, cfg, static_cast<std::uint64_t>(r));
    count[z] += 1;
    hits[z] += a[0];
  }
  for (int z = 0; z < 2; ++z) {
    const double mu = z == 1 ? 0.85 : 0.15;
    const double se = std::sqrt(mu * (1 - mu) / count[z]);
    CHECK(std::fabs(hits[z] / count[z] - mu) <= 3 * se);
  }
}

TEST_CASE("outcome rule collapses to the arm mean under perfect compliance") {
  TrueComponents cell;
  cell.points = Eigen::MatrixXd::Zero(1, 1);
  cell.mu1_a = Eigen::VectorXd::Constant(1, 1.0);
  cell.mu0_a = Eigen::VectorXd::Constant(1, 0.0);
  cell.mu1_y = Eigen::VectorXd::Constant(1, 2.5);
  cell.mu0_y = Eigen::VectorXd::Constant(1, 1.0);
  cell.pi = Eigen::VectorXd::Constant(1, 0.5);
  cell.delta_a = cell.mu1_a - cell.mu0_a;
  cell.delta_y = cell.mu1_y - cell.mu0_y;
  cell.tau = cell.delta_y.cwiseQuotient(cell.delta_a);

  SimConfig cfg;
  cfg.noise_y_sd = 0.0;
  cfg.confounding = 2.0;
  Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.17);
  Eigen::VectorXd a1 = Eigen::VectorXd::Constant(1, 1.0);
  Eigen::VectorXd y = gen_outcomes(cell, u, a1, cfg, 1);
  CHECK(y[0] == doctest::Approx(2.5 + 2.0 * 0.17).epsilon(1e-12));

  // Equal outcome surfaces make the deterministic part constant in A.
  cell.mu1_y.setConstant(3.0);
  cell.mu0_y.setConstant(3.0);
  cell.mu1_a.setConstant(0.8);
  cell.mu0_a.setConstant(0.2);
  cell.delta_a = cell.mu1_a - cell.mu0_a;
  cell.delta_y = cell.mu1_y - cell.mu0_y;
  cell.tau = cell.delta_y.cwiseQuotient(cell.delta_a);
  cfg.confounding = 0.0;
  Eigen::VectorXd u0 = Eigen::VectorXd::Zero(1);
  for (double a : {0.0, 1.0}) {
    Eigen::VectorXd av = Eigen::VectorXd::Constant(1, a);
    CHECK(gen_outcomes(cell, u0, av, cfg, 2)[0] == doctest::Approx(3.0).epsilon(1e-12));
  }
}

TEST_CASE("simulate is deterministic and internally consistent") {
  SimConfig cfg;
  cfg.n = 300;
  cfg.seed = 11;
  SimResult r1 = simulate(cfg);
  SimResult r2 = simulate(cfg);
  CHECK(r1.data.covariates == r2.data.covariates);
  CHECK(r1.data.instrument == r2.data.instrument);
  CHECK(r1.data.treatment == r2.data.treatment);
  CHECK(r1.data.outcome == r2.data.outcome);
  CHECK(*r1.data.oracle_cate == *r2.data.oracle_cate);

  const auto p1 = std::filesystem::temp_directory_path() / "mriv_sim_det1.csv";
  const auto p2 = std::filesystem::temp_directory_path() / "mriv_sim_det2.csv";
  save_dataset(r1.data, p1.string());
  save_dataset(r2.data, p2.string());
  std::ifstream f1(p1), f2(p2);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());

  CHECK(*r1.data.oracle_cate == r1.truth.tau.head(300));
  CHECK_FALSE(check_components(r1.truth).has_value());
}

TEST_CASE("joint draws cover data and test points consistently") {
  SimConfig cfg;
  cfg.n = 100;
  cfg.seed = 9;
  Eigen::MatrixXd grid(11, 1);
  for (int i = 0; i <= 10; ++i) grid(i, 0) = -2.0 + 0.4 * i;
  SimResult r = simulate(cfg, grid);
  CHECK(r.truth.size() == 111);
  CHECK(r.truth.points.bottomRows(11) == grid);
  CHECK(r.data.n() == 100);
  CHECK(wald_identity_check(r.truth) <= 1e-10);
}

TEST_CASE("instrument rate matches the mean propensity") {
  SimConfig cfg;
  cfg.n = 10000;
  cfg.seed = 21;
  SimResult r = simulate(cfg);
  const double z_rate = r.data.instrument.mean();
  const double pi_mean = r.truth.pi.head(cfg.n).mean();
  const double se = std::sqrt(pi_mean * (1 - pi_mean) / static_cast<double>(cfg.n));
  CHECK(std::fabs(z_rate - pi_mean) <= 3 * se);
}

TEST_CASE("semi-synthetic surfaces follow their closed forms") {
  SimConfig cfg;
  cfg.n = 400;
  cfg.seed = 2;
  SimResult r = semi_synthetic(cfg);
  CHECK(r.data.p() == 5);
  for (Eigen::Index i = 0; i < r.data.n(); ++i) {
    const double x1 = r.data.covariates(i, 0);
    const double sig = 1.0 / (1.0 + std::exp(-x1));
    CHECK(r.truth.mu1_a[i] == doctest::Approx(0.3 * sig + 0.7).epsilon(1e-12));
    CHECK(r.truth.mu0_a[i] == doctest::Approx(0.3 * sig).epsilon(1e-12));
    CHECK(r.truth.delta_a[i] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK((*r.data.oracle_cate)[i] == doctest::Approx(x1 * x1 / 0.7).epsilon(1e-12));
  }
  // Spot values of the closed forms: x1 = 0 gives tau = 0 with the
  // 0.85 / 0.15 compliance pair, x1 = 0.7 gives tau = 0.49 / 0.7 = 0.7.
  CHECK(0.3 / (1.0 + std::exp(-0.0)) + 0.7 == doctest::Approx(0.85));
  CHECK(0.3 / (1.0 + std::exp(-0.0)) == doctest::Approx(0.15));
  CHECK(0.7 * 0.7 / 0.7 == doctest::Approx(0.7));
}

TEST_CASE("monte-carlo self-verification passes and catches corruption") {
  SimConfig cfg;
  cfg.seed = 5;
  McVerifyReport ok = mc_verify(cfg, 5, 20000);
  CHECK(ok.pass);
  CHECK(ok.bin_pass_fraction >= 0.95);

  // Flipping the compliance surfaces used for generation flips the threshold
  // sign; the treatment checks must notice.
  Eigen::MatrixXd points(5, 1);
  for (int i = 0; i < 5; ++i) points(i, 0) = -1.5 + 0.75 * i;
  TrueComponents truth = build_components(points, cfg);
  TrueComponents corrupted = truth;
  corrupted.mu1_a = Eigen::VectorXd::Ones(5) - truth.mu1_a;
  corrupted.mu0_a = Eigen::VectorXd::Ones(5) - truth.mu0_a;
  McVerifyReport bad = mc_verify_at(corrupted, truth, cfg, 20000, 7);
  CHECK_FALSE(bad.pass);
  bool a_check_failed = false;
  for (const auto& bin : bad.bins) {
    a_check_failed = a_check_failed || !bin.treat[0].pass || !bin.treat[1].pass;
  }
  CHECK(a_check_failed);
}

TEST_CASE("confounding strength leaves conditional means unchanged") {
  SimConfig strong;
  strong.seed = 6;
  strong.confounding = 2.0;
  McVerifyReport r = mc_verify(strong, 4, 20000);
  CHECK(r.pass);
}
