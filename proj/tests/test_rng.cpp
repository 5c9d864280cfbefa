#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "mriv/rng.hpp"

using namespace mriv;

TEST_CASE("norm_quantile matches reference values") {
  // References computed with 40-digit arithmetic.
  CHECK(rng::norm_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::fabs(rng::norm_quantile(0.975) - 1.9599639845400542355) < 1e-9);
  CHECK(std::fabs(rng::norm_quantile(0.3) - (-0.52440051270804078404)) < 1e-9);
  CHECK(std::fabs(rng::norm_quantile(1e-9) - (-5.9978070150076868716)) < 1e-9);
  CHECK(std::fabs(rng::norm_quantile(0.9999999) - 5.1993375821928169316) < 1e-9);
}

TEST_CASE("norm_quantile inverts the CDF") {
  for (double p : {1e-6, 0.01, 0.2, 0.5, 0.8, 0.99, 1.0 - 1e-6}) {
    CHECK(rng::norm_cdf(rng::norm_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
  }
  CHECK_THROWS(rng::norm_quantile(0.0));
  CHECK_THROWS(rng::norm_quantile(1.0));
}

TEST_CASE("streams are deterministic and key-dependent") {
  rng::Stream a(rng::derive(42, "test"));
  rng::Stream b(rng::derive(42, "test"));
  rng::Stream c(rng::derive(43, "test"));
  bool all_equal = true, any_diff_key = false;
  for (int i = 0; i < 100; ++i) {
    const double va = a.uniform();
    all_equal = all_equal && va == b.uniform();
    any_diff_key = any_diff_key || va != c.uniform();
  }
  CHECK(all_equal);
  CHECK(any_diff_key);
}

TEST_CASE("uniform stays in [0,1) and open_uniform in (0,1)") {
  rng::Stream s(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = s.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = s.open_uniform();
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("normal draws have roughly standard moments") {
  rng::Stream s(7);
  const int n = 200000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    sum += z;
    sum2 += z * z;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::fabs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("permutation is a permutation") {
  rng::Stream s(3);
  auto perm = s.permutation(257);
  std::set<std::size_t> seen(perm.begin(), perm.end());
  CHECK(seen.size() == 257);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 256);
}
