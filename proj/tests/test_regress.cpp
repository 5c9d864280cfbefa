#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "mriv/nn.hpp"
#include "mriv/regress.hpp"
#include "mriv/rng.hpp"

using namespace mriv;

namespace {

Eigen::MatrixXd column(std::initializer_list<double> values) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return m;
}

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

}  // namespace

TEST_CASE("ridge with zero penalty interpolates exact linear data") {
  Eigen::MatrixXd X = column({0, 1, 2, 4});
  Eigen::VectorXd y = 2.0 * X.col(0);
  auto model = fit_regressor(RegressorSpec::ridge_default(0.0), X, y);
  CHECK(model.predict(column({3}))[0] == doctest::Approx(6.0).epsilon(1e-10));
}

TEST_CASE("ridge with huge penalty falls back to the mean") {
  Eigen::MatrixXd X = column({0, 1, 2, 3});
  Eigen::VectorXd y = vec({1, 3, 2, 6});
  auto model = fit_regressor(RegressorSpec::ridge_default(1e12), X, y);
  const double mean = y.mean();
  CHECK(model.predict(column({-5}))[0] == doctest::Approx(mean).epsilon(1e-6));
  CHECK(model.predict(column({10}))[0] == doctest::Approx(mean).epsilon(1e-6));
}

TEST_CASE("ridge rejects a singular system at zero penalty") {
  Eigen::MatrixXd X(4, 2);  // duplicated column
  X << 1, 1, 2, 2, 3, 3, 4, 4;
  Eigen::VectorXd y = vec({1, 2, 3, 4});
  CHECK_THROWS_AS(fit_regressor(RegressorSpec::ridge_default(0.0), X, y), std::runtime_error);
  CHECK_NOTHROW(fit_regressor(RegressorSpec::ridge_default(1e-6), X, y));
}

TEST_CASE("ridge solution satisfies the normal equations") {
  rng::Stream gen(5);
  Eigen::MatrixXd X(40, 3);
  Eigen::VectorXd y(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    for (int j = 0; j < 3; ++j) X(i, j) = gen.normal();
    y[i] = 0.5 * X(i, 0) - X(i, 2) + 0.1 * gen.normal();
  }
  const double lambda = 0.37;
  auto model = fit_regressor(RegressorSpec::ridge_default(lambda), X, y);

  // Independent closed-form solve; coefficients are unique, so matching
  // predictions certify the fitted model solves the same system.
  Eigen::RowVectorXd xm = X.colwise().mean();
  Eigen::MatrixXd Xc = X.rowwise() - xm;
  Eigen::VectorXd yc = y.array() - y.mean();
  Eigen::MatrixXd gram = Xc.transpose() * Xc;
  gram.diagonal().array() += lambda;
  Eigen::VectorXd beta = gram.ldlt().solve(Xc.transpose() * yc);
  Eigen::VectorXd expected = ((X.rowwise() - xm) * beta).array() + y.mean();
  const double tol = 1e-8 * (1.0 + y.norm());
  CHECK((model.predict(X) - expected).lpNorm<Eigen::Infinity>() < tol);
}

TEST_CASE("median heuristic on {0,1,3} gives lengthscale 2") {
  CHECK(median_heuristic_lengthscale(column({0, 1, 3})) == doctest::Approx(2.0));
  // Degenerate inputs fall back to 1.
  CHECK(median_heuristic_lengthscale(column({2, 2, 2})) == doctest::Approx(1.0));
}

TEST_CASE("kernel ridge solves its regularized system") {
  rng::Stream gen(6);
  Eigen::MatrixXd X(30, 1);
  Eigen::VectorXd y(30);
  for (Eigen::Index i = 0; i < 30; ++i) {
    X(i, 0) = gen.normal();
    y[i] = std::sin(2.0 * X(i, 0)) + 0.05 * gen.normal();
  }
  RegressorSpec spec = RegressorSpec::kernel_ridge_default();
  spec.kernel_lengthscale = 0.8;
  auto model = fit_regressor(spec, X, y);

  const double lambda = spec.ridge_penalty * 30;
  Eigen::MatrixXd K(30, 30);
  for (int i = 0; i < 30; ++i) {
    for (int j = 0; j < 30; ++j) {
      K(i, j) = std::exp(-(X.row(i) - X.row(j)).squaredNorm() / (2 * 0.8 * 0.8));
    }
  }
  Eigen::MatrixXd Kl = K;
  Kl.diagonal().array() += lambda;
  Eigen::VectorXd alpha = Kl.llt().solve((y.array() - y.mean()).matrix());
  Eigen::VectorXd expected = (K * alpha).array() + y.mean();
  const double tol = 1e-8 * (1.0 + y.norm());
  CHECK((model.predict(X) - expected).lpNorm<Eigen::Infinity>() < tol);
}

TEST_CASE("nearest-neighbor interpolation returns training labels") {
  Eigen::MatrixXd X = column({0, 1, 2, 5});
  Eigen::VectorXd y = vec({3, -1, 4, 9});
  auto model = fit_regressor(RegressorSpec::knn_default(1), X, y);
  CHECK(model.predict(X) == y);
}

TEST_CASE("predict handles empty input and repeated calls identically") {
  Eigen::MatrixXd X = column({0, 1, 2, 3});
  Eigen::VectorXd y = vec({0, 1, 4, 9});
  for (auto spec : {RegressorSpec::ridge_default(), RegressorSpec::kernel_ridge_default(),
                    RegressorSpec::knn_default(2), RegressorSpec::mlp_default(3)}) {
    auto model = fit_regressor(spec, X, y);
    CHECK(model.predict(Eigen::MatrixXd(0, 1)).size() == 0);
    Eigen::MatrixXd probe = column({-1, 0.5, 7});
    CHECK(model.predict(probe) == model.predict(probe));
  }
}

TEST_CASE("predict rejects dimension mismatches") {
  Eigen::MatrixXd X = column({0, 1, 2, 3});
  Eigen::VectorXd y = vec({0, 1, 4, 9});
  auto model = fit_regressor(RegressorSpec::ridge_default(), X, y);
  CHECK_THROWS_AS(model.predict(Eigen::MatrixXd::Zero(2, 2)), std::invalid_argument);
}

TEST_CASE("mlp fits are bit-deterministic given the seed") {
  rng::Stream gen(8);
  Eigen::MatrixXd X(64, 2);
  Eigen::VectorXd y(64);
  for (Eigen::Index i = 0; i < 64; ++i) {
    X(i, 0) = gen.normal();
    X(i, 1) = gen.normal();
    y[i] = X(i, 0) * X(i, 1);
  }
  RegressorSpec spec = RegressorSpec::mlp_default(17);
  spec.mlp_epochs = 5;
  auto m1 = fit_regressor(spec, X, y);
  auto m2 = fit_regressor(spec, X, y);
  CHECK(m1.predict(X) == m2.predict(X));

  RegressorSpec other = spec.with_seed(18);
  auto m3 = fit_regressor(other, X, y);
  CHECK(m1.predict(X) != m3.predict(X));
}

TEST_CASE("single-class labels give a constant clamped classifier") {
  Eigen::MatrixXd X = column({0, 1, 2, 3});
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(4);
  auto model = fit_classifier(RegressorSpec::ridge_default(), X, ones);
  Eigen::VectorXd p = model.predict_proba(column({-2, 10}));
  CHECK(p[0] == doctest::Approx(1.0 - 1e-6));
  CHECK(p[1] == doctest::Approx(1.0 - 1e-6));
  CHECK_THROWS_AS(fit_classifier(RegressorSpec::ridge_default(), X, ones, false),
                  std::invalid_argument);
}

TEST_CASE("separable data reaches full training accuracy") {
  Eigen::MatrixXd X = column({-3, -2.5, -2, -1.5, 1.5, 2, 2.5, 3});
  Eigen::VectorXd labels = vec({0, 0, 0, 0, 1, 1, 1, 1});
  SUBCASE("logistic") {
    auto model = fit_classifier(RegressorSpec::ridge_default(1e-6), X, labels);
    Eigen::VectorXd p = model.predict_proba(X);
    for (Eigen::Index i = 0; i < 8; ++i) CHECK((p[i] > 0.5) == (labels[i] > 0.5));
  }
  SUBCASE("mlp") {
    RegressorSpec spec = RegressorSpec::mlp_default(4);
    spec.mlp_epochs = 500;
    spec.mlp_batch_size = 8;
    auto model = fit_classifier(spec, X, labels);
    Eigen::VectorXd p = model.predict_proba(X);
    for (Eigen::Index i = 0; i < 8; ++i) CHECK((p[i] > 0.5) == (labels[i] > 0.5));
  }
}

TEST_CASE("coin-flip labels concentrate near one half") {
  rng::Stream gen(12);
  const int n = 1000;
  Eigen::MatrixXd X(n, 1);
  Eigen::VectorXd labels(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = gen.normal();
    labels[i] = gen.bernoulli(0.5) ? 1.0 : 0.0;
  }
  Eigen::MatrixXd grid(41, 1);
  for (int i = 0; i <= 40; ++i) grid(i, 0) = -2.0 + 0.1 * i;
  for (auto spec : {RegressorSpec::ridge_default(), RegressorSpec::mlp_default(2)}) {
    auto model = fit_classifier(spec, X, labels);
    Eigen::VectorXd p = model.predict_proba(grid);
    CHECK((p.array() - 0.5).abs().mean() < 0.1);
  }
  // The linear model cannot overfit locally; it stays within 0.1 pointwise.
  Eigen::VectorXd p = fit_classifier(RegressorSpec::ridge_default(), X, labels).predict_proba(grid);
  CHECK((p.array() - 0.5).abs().maxCoeff() < 0.1);
}

TEST_CASE("classifier outputs always stay inside the clamp") {
  rng::Stream gen(13);
  Eigen::MatrixXd X(50, 1);
  Eigen::VectorXd labels(50);
  for (int i = 0; i < 50; ++i) {
    X(i, 0) = gen.normal() * 3;
    labels[i] = X(i, 0) > 0 ? 1.0 : 0.0;
  }
  Eigen::MatrixXd probe = column({-100, -1, 0, 1, 100});
  for (auto spec : {RegressorSpec::ridge_default(), RegressorSpec::kernel_ridge_default(),
                    RegressorSpec::knn_default(3), RegressorSpec::mlp_default(1)}) {
    auto model = fit_classifier(spec, X, labels);
    Eigen::VectorXd p = model.predict_proba(probe);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      CHECK(p[i] >= 1e-6);
      CHECK(p[i] <= 1.0 - 1e-6);
    }
  }
}

TEST_CASE("analytic mlp gradients match finite differences") {
  rng::Stream gen(21);
  Eigen::MatrixXd X(16, 2);
  Eigen::VectorXd y(16);
  for (Eigen::Index i = 0; i < 16; ++i) {
    X(i, 0) = gen.normal();
    X(i, 1) = gen.normal();
    y[i] = std::sin(X(i, 0)) - X(i, 1);
  }
  RegressorSpec spec = RegressorSpec::mlp_default(9);
  spec.mlp_hidden1 = 12;
  spec.mlp_hidden2 = 12;
  GradientCheckReport report = gradient_check(spec, X, y);
  CHECK(report.max_rel_error < 1e-4);
  CHECK(report.pass);
  CHECK_THROWS_AS(gradient_check(RegressorSpec::ridge_default(), X, y), std::invalid_argument);
}

TEST_CASE("relative gradient error conventions") {
  // Both magnitudes below 1e-12 count as agreement.
  Eigen::VectorXd a = vec({1e-13, 0.5});
  Eigen::VectorXd n = vec({-1e-13, 0.5});
  CHECK(nn::max_relative_gradient_error(a, n) == 0.0);

  // A sign flip on one coordinate is loud.
  Eigen::VectorXd flipped = vec({1e-13, -0.5});
  CHECK(nn::max_relative_gradient_error(a, flipped) > 1.0);
}

TEST_CASE("zero network on zero data has vanishing gradients") {
  nn::Dense l1, l2;
  rng::Stream s(1);
  l1.init(2, 4, s);
  l2.init(4, 1, s);
  l1.weight.setZero();
  l1.bias.setZero();
  l2.weight.setZero();
  l2.bias.setZero();
  l1.zero_grad();
  l2.zero_grad();

  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 2);
  Eigen::MatrixXd z1 = l1.forward(X);
  Eigen::MatrixXd h1 = nn::relu(z1);
  Eigen::VectorXd out = l2.forward(h1).col(0);
  Eigen::MatrixXd grad_out = (out - Eigen::VectorXd::Zero(3)) * 2.0 / 3.0;
  Eigen::MatrixXd grad_h1 = l2.backward(h1, grad_out);
  l1.backward(X, nn::relu_backward(z1, grad_h1));

  std::vector<const nn::Dense*> layers = {&l1, &l2};
  Eigen::VectorXd grads = nn::flatten_gradients(layers);
  CHECK(grads.lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(nn::max_relative_gradient_error(grads, Eigen::VectorXd::Zero(grads.size())) == 0.0);
}
