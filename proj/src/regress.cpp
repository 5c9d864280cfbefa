#include "mriv/regress.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mriv/nn.hpp"
#include "mriv/rng.hpp"

namespace mriv {

std::string to_string(RegressorVariant v) {
  switch (v) {
    case RegressorVariant::ridge: return "ridge";
    case RegressorVariant::kernel_ridge: return "kernel-ridge";
    case RegressorVariant::k_nearest: return "k-nearest";
    case RegressorVariant::mlp: return "mlp";
  }
  return "unknown";
}

RegressorVariant regressor_variant_from_string(const std::string& s) {
  if (s == "ridge") return RegressorVariant::ridge;
  if (s == "kernel-ridge") return RegressorVariant::kernel_ridge;
  if (s == "k-nearest") return RegressorVariant::k_nearest;
  if (s == "mlp") return RegressorVariant::mlp;
  throw std::invalid_argument("unknown regressor variant: " + s);
}

RegressorSpec RegressorSpec::ridge_default(double penalty) {
  RegressorSpec s;
  s.variant = RegressorVariant::ridge;
  s.ridge_penalty = penalty;
  return s;
}

RegressorSpec RegressorSpec::kernel_ridge_default() {
  RegressorSpec s;
  s.variant = RegressorVariant::kernel_ridge;
  s.ridge_penalty = 1e-3;      // per-sample; the solve uses 1e-3 * n
  s.kernel_lengthscale = 0.0;  // median heuristic
  return s;
}

RegressorSpec RegressorSpec::knn_default(int k) {
  RegressorSpec s;
  s.variant = RegressorVariant::k_nearest;
  s.k_neighbors = k;
  return s;
}

RegressorSpec RegressorSpec::mlp_default(std::uint64_t seed) {
  RegressorSpec s;
  s.variant = RegressorVariant::mlp;
  s.seed = seed;
  return s;
}

double median_heuristic_lengthscale(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      dists.push_back((X.row(i) - X.row(j)).norm());
    }
  }
  if (dists.empty()) return 1.0;
  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
  double median = dists[mid];
  if (dists.size() % 2 == 0) {
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid - 1),
                     dists.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + dists[mid - 1]);
  }
  return median > 0.0 ? median : 1.0;
}

namespace {

void check_training_inputs(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const RegressorSpec& spec) {
  if (X.rows() != y.size()) throw std::invalid_argument("rows(X) must equal len(y)");
  Eigen::Index min_rows = 2;
  if (spec.variant == RegressorVariant::k_nearest) {
    min_rows = std::max<Eigen::Index>(min_rows, spec.k_neighbors);
  }
  if (X.rows() < min_rows) {
    throw std::invalid_argument("too few rows to fit: " + std::to_string(X.rows()));
  }
  if (!X.allFinite() || !y.allFinite()) {
    throw std::invalid_argument("non-finite entries in training data");
  }
}

void check_predict_dim(Eigen::Index expected, const Eigen::MatrixXd& X) {
  if (X.cols() != expected) {
    throw std::invalid_argument("dimension mismatch: model expects p=" + std::to_string(expected) +
                                ", got p=" + std::to_string(X.cols()));
  }
}

Eigen::MatrixXd se_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double lengthscale) {
  Eigen::MatrixXd K(A.rows(), B.rows());
  const double inv = 1.0 / (2.0 * lengthscale * lengthscale);
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < B.rows(); ++j) {
      K(i, j) = std::exp(-(A.row(i) - B.row(j)).squaredNorm() * inv);
    }
  }
  return K;
}

}  // namespace

namespace detail {

class RegressorImpl {
 public:
  explicit RegressorImpl(RegressorSpec spec, Eigen::Index dim) : spec_(std::move(spec)), dim_(dim) {}
  virtual ~RegressorImpl() = default;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& X) const = 0;
  const RegressorSpec& spec() const { return spec_; }
  Eigen::Index dim() const { return dim_; }

 private:
  RegressorSpec spec_;
  Eigen::Index dim_;
};

class ClassifierImpl {
 public:
  explicit ClassifierImpl(RegressorSpec spec, Eigen::Index dim) : spec_(std::move(spec)), dim_(dim) {}
  virtual ~ClassifierImpl() = default;
  virtual Eigen::VectorXd predict_proba(const Eigen::MatrixXd& X) const = 0;
  const RegressorSpec& spec() const { return spec_; }
  Eigen::Index dim() const { return dim_; }

 private:
  RegressorSpec spec_;
  Eigen::Index dim_;
};

namespace {

class RidgeModel final : public RegressorImpl {
 public:
  RidgeModel(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
      : RegressorImpl(spec, X.cols()) {
    x_mean_ = X.colwise().mean();
    const double y_mean = y.mean();
    Eigen::MatrixXd Xc = X.rowwise() - x_mean_;
    Eigen::VectorXd yc = y.array() - y_mean;
    Eigen::MatrixXd gram = Xc.transpose() * Xc;
    const double lambda = spec.ridge_penalty;
    if (lambda < 0.0) throw std::invalid_argument("ridge penalty must be nonnegative");
    if (lambda == 0.0) {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
      if (!lu.isInvertible()) {
        throw std::runtime_error("singular normal equations with zero ridge penalty");
      }
      coef_ = lu.solve(Xc.transpose() * yc);
    } else {
      gram.diagonal().array() += lambda;
      coef_ = gram.ldlt().solve(Xc.transpose() * yc);
    }
    intercept_ = y_mean;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    check_predict_dim(dim(), X);
    return ((X.rowwise() - x_mean_) * coef_).array() + intercept_;
  }

 private:
  Eigen::RowVectorXd x_mean_;
  Eigen::VectorXd coef_;
  double intercept_ = 0.0;
};

class KernelRidgeModel final : public RegressorImpl {
 public:
  KernelRidgeModel(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
      : RegressorImpl(spec, X.cols()), X_(X) {
    lengthscale_ = spec.kernel_lengthscale > 0.0 ? spec.kernel_lengthscale
                                                 : median_heuristic_lengthscale(X);
    y_mean_ = y.mean();
    Eigen::MatrixXd K = se_kernel(X, X, lengthscale_);
    const double lambda = spec.ridge_penalty * static_cast<double>(X.rows());
    if (lambda < 0.0) throw std::invalid_argument("ridge penalty must be nonnegative");
    K.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("singular kernel system; increase ridge penalty");
    }
    alpha_ = llt.solve((y.array() - y_mean_).matrix());
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    check_predict_dim(dim(), X);
    return (se_kernel(X, X_, lengthscale_) * alpha_).array() + y_mean_;
  }

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd alpha_;
  double lengthscale_ = 1.0;
  double y_mean_ = 0.0;
};

class KnnModel final : public RegressorImpl {
 public:
  KnnModel(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
      : RegressorImpl(spec, X.cols()), X_(X), y_(y), k_(spec.k_neighbors) {
    if (k_ < 1) throw std::invalid_argument("k_neighbors must be positive");
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    check_predict_dim(dim(), X);
    Eigen::VectorXd out(X.rows());
    std::vector<std::pair<double, Eigen::Index>> order(static_cast<std::size_t>(X_.rows()));
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      for (Eigen::Index i = 0; i < X_.rows(); ++i) {
        order[static_cast<std::size_t>(i)] = {(X.row(r) - X_.row(i)).norm(), i};
      }
      std::partial_sort(order.begin(), order.begin() + k_, order.end());
      double sum = 0.0;
      for (int j = 0; j < k_; ++j) sum += y_[order[static_cast<std::size_t>(j)].second];
      out[r] = sum / k_;
    }
    return out;
  }

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  int k_;
};

// Two hidden ReLU layers with a linear (regression) or sigmoid (probability)
// head, trained with minibatch Adam.
struct MlpCore {
  nn::Dense l1, l2, l3;
  bool sigmoid_head = false;

  Eigen::VectorXd forward(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd h1 = nn::relu(l1.forward(X));
    Eigen::MatrixXd h2 = nn::relu(l2.forward(h1));
    Eigen::VectorXd z = l3.forward(h2).col(0);
    if (sigmoid_head) {
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = 1.0 / (1.0 + std::exp(-z[i]));
    }
    return z;
  }

  std::vector<nn::Dense*> layers() { return {&l1, &l2, &l3}; }
  std::vector<const nn::Dense*> layers() const { return {&l1, &l2, &l3}; }

  /// Full forward/backward pass over a batch; accumulates parameter
  /// gradients of the mean loss and returns its value.
  double backprop(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const double inv_b = 1.0 / static_cast<double>(X.rows());
    Eigen::MatrixXd z1 = l1.forward(X);
    Eigen::MatrixXd h1 = nn::relu(z1);
    Eigen::MatrixXd z2 = l2.forward(h1);
    Eigen::MatrixXd h2 = nn::relu(z2);
    Eigen::VectorXd z3 = l3.forward(h2).col(0);

    double loss = 0.0;
    Eigen::MatrixXd grad_z3(X.rows(), 1);
    if (sigmoid_head) {
      for (Eigen::Index i = 0; i < z3.size(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-z3[i]));
        loss += nn::bce(p, y[i]);
        grad_z3(i, 0) = (p - y[i]) * inv_b;
      }
    } else {
      for (Eigen::Index i = 0; i < z3.size(); ++i) {
        const double r = z3[i] - y[i];
        loss += r * r;
        grad_z3(i, 0) = 2.0 * r * inv_b;
      }
    }
    loss *= inv_b;

    Eigen::MatrixXd grad_h2 = l3.backward(h2, grad_z3);
    Eigen::MatrixXd grad_z2 = nn::relu_backward(z2, grad_h2);
    Eigen::MatrixXd grad_h1 = l2.backward(h1, grad_z2);
    Eigen::MatrixXd grad_z1 = nn::relu_backward(z1, grad_h1);
    l1.backward(X, grad_z1);
    return loss;
  }
};

int resolve_hidden(int requested, Eigen::Index p) {
  if (requested > 0) return requested;
  return 5 * static_cast<int>(std::max<Eigen::Index>(p, 8));
}

MlpCore train_mlp(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  bool sigmoid_head) {
  MlpCore net;
  net.sigmoid_head = sigmoid_head;
  const int h1 = resolve_hidden(spec.mlp_hidden1, X.cols());
  const int h2 = resolve_hidden(spec.mlp_hidden2 > 0 ? spec.mlp_hidden2 : spec.mlp_hidden1, X.cols());
  rng::Stream init_stream(rng::derive(spec.seed, "mlp-init"));
  net.l1.init(X.cols(), h1, init_stream);
  net.l2.init(h1, h2, init_stream);
  net.l3.init(h2, 1, init_stream);

  nn::Adam opt(spec.mlp_learning_rate);
  opt.attach(net.layers());
  rng::Stream shuffle_stream(rng::derive(spec.seed, "mlp-shuffle"));
  const auto n = static_cast<std::size_t>(X.rows());
  const auto batch = static_cast<std::size_t>(std::max(1, spec.mlp_batch_size));

  for (int epoch = 0; epoch < spec.mlp_epochs; ++epoch) {
    auto perm = shuffle_stream.permutation(n);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t b = std::min(batch, n - start);
      Eigen::MatrixXd Xb(b, X.cols());
      Eigen::VectorXd yb(b);
      for (std::size_t i = 0; i < b; ++i) {
        Xb.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(perm[start + i]));
        yb[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(perm[start + i])];
      }
      for (nn::Dense* l : net.layers()) l->zero_grad();
      const double loss = net.backprop(Xb, yb);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("non-finite loss during training (epoch " +
                                 std::to_string(epoch) + ")");
      }
      opt.step();
    }
  }
  return net;
}

class MlpRegressorModel final : public RegressorImpl {
 public:
  MlpRegressorModel(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
      : RegressorImpl(spec, X.cols()), net_(train_mlp(spec, X, y, false)) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    check_predict_dim(dim(), X);
    return net_.forward(X);
  }

 private:
  MlpCore net_;
};

class ConstantClassifier final : public ClassifierImpl {
 public:
  ConstantClassifier(const RegressorSpec& spec, Eigen::Index dim, double p)
      : ClassifierImpl(spec, dim), p_(nn::clamp_prob(p)) {}

  Eigen::VectorXd predict_proba(const Eigen::MatrixXd& X) const override {
    check_predict_dim(dim(), X);
    return Eigen::VectorXd::Constant(X.rows(), p_);
  }

 private:
  double p_;
};

// L2-penalized logistic regression trained by full-batch adaptive gradient
// descent from a zero start (deterministic without a seed).
class LogisticModel final : public ClassifierImpl {
 public:
  LogisticModel(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
      : ClassifierImpl(spec, X.cols()) {
    x_mean_ = X.colwise().mean();
    Eigen::MatrixXd Xc = X.rowwise() - x_mean_;
    coef_ = Eigen::VectorXd::Zero(X.cols());
    intercept_ = 0.0;
    const double inv_n = 1.0 / static_cast<double>(X.rows());
    const double lambda = spec.ridge_penalty;

    Eigen::VectorXd mw = Eigen::VectorXd::Zero(X.cols()), vw = mw;
    double mb = 0.0, vb = 0.0;
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int t = 1; t <= 500; ++t) {
      Eigen::VectorXd p = ((Xc * coef_).array() + intercept_)
                              .unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
      Eigen::VectorXd resid = p - y;
      Eigen::VectorXd gw = Xc.transpose() * resid * inv_n + lambda * coef_;
      double gb = resid.sum() * inv_n;
      const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
      mw = b1 * mw + (1 - b1) * gw;
      vw = (b2 * vw.array() + (1 - b2) * gw.array().square()).matrix();
      coef_.array() -= lr * (mw.array() / c1) / ((vw.array() / c2).sqrt() + eps);
      mb = b1 * mb + (1 - b1) * gb;
      vb = b2 * vb + (1 - b2) * gb * gb;
      intercept_ -= lr * (mb / c1) / (std::sqrt(vb / c2) + eps);
    }
  }

  Eigen::VectorXd predict_proba(const Eigen::MatrixXd& X) const override {
    check_predict_dim(dim(), X);
    Eigen::VectorXd z = ((X.rowwise() - x_mean_) * coef_).array() + intercept_;
    return nn::clamp_prob(
        z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); }).eval());
  }

 private:
  Eigen::RowVectorXd x_mean_;
  Eigen::VectorXd coef_;
  double intercept_ = 0.0;
};

class KernelRidgeClassifier final : public ClassifierImpl {
 public:
  KernelRidgeClassifier(const RegressorSpec& spec, const Eigen::MatrixXd& X,
                        const Eigen::VectorXd& y)
      : ClassifierImpl(spec, X.cols()), model_(spec, X, y) {}

  Eigen::VectorXd predict_proba(const Eigen::MatrixXd& X) const override {
    return nn::clamp_prob(model_.predict(X));
  }

 private:
  KernelRidgeModel model_;
};

class KnnClassifier final : public ClassifierImpl {
 public:
  KnnClassifier(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
      : ClassifierImpl(spec, X.cols()), model_(spec, X, y) {}

  Eigen::VectorXd predict_proba(const Eigen::MatrixXd& X) const override {
    return nn::clamp_prob(model_.predict(X));
  }

 private:
  KnnModel model_;
};

class MlpClassifier final : public ClassifierImpl {
 public:
  MlpClassifier(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
      : ClassifierImpl(spec, X.cols()), net_(train_mlp(spec, X, y, true)) {}

  Eigen::VectorXd predict_proba(const Eigen::MatrixXd& X) const override {
    check_predict_dim(dim(), X);
    return nn::clamp_prob(net_.forward(X).eval());
  }

 private:
  MlpCore net_;
};

}  // namespace
}  // namespace detail

Eigen::VectorXd FittedRegressor::predict(const Eigen::MatrixXd& X) const {
  if (!impl_) throw std::logic_error("predict on an unfitted regressor");
  Eigen::VectorXd out = impl_->predict(X);
  if (!out.allFinite()) throw std::runtime_error("non-finite prediction");
  return out;
}

const RegressorSpec& FittedRegressor::spec() const { return impl_->spec(); }
Eigen::Index FittedRegressor::input_dim() const { return impl_->dim(); }

Eigen::VectorXd FittedClassifier::predict_proba(const Eigen::MatrixXd& X) const {
  if (!impl_) throw std::logic_error("predict on an unfitted classifier");
  return impl_->predict_proba(X);
}

const RegressorSpec& FittedClassifier::spec() const { return impl_->spec(); }
Eigen::Index FittedClassifier::input_dim() const { return impl_->dim(); }

FittedRegressor fit_regressor(const RegressorSpec& spec, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& y) {
  check_training_inputs(X, y, spec);
  FittedRegressor out;
  switch (spec.variant) {
    case RegressorVariant::ridge:
      out.impl_ = std::make_shared<detail::RidgeModel>(spec, X, y);
      break;
    case RegressorVariant::kernel_ridge:
      out.impl_ = std::make_shared<detail::KernelRidgeModel>(spec, X, y);
      break;
    case RegressorVariant::k_nearest:
      out.impl_ = std::make_shared<detail::KnnModel>(spec, X, y);
      break;
    case RegressorVariant::mlp:
      out.impl_ = std::make_shared<detail::MlpRegressorModel>(spec, X, y);
      break;
  }
  return out;
}

FittedClassifier fit_classifier(const RegressorSpec& spec, const Eigen::MatrixXd& X,
                                const Eigen::VectorXd& labels, bool allow_constant) {
  check_training_inputs(X, labels, spec);
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      throw std::invalid_argument("classifier labels must be 0 or 1 (row " + std::to_string(i) + ")");
    }
  }
  FittedClassifier out;
  const double mean = labels.mean();
  if (mean == 0.0 || mean == 1.0) {
    if (!allow_constant) throw std::invalid_argument("single-class labels");
    out.impl_ = std::make_shared<detail::ConstantClassifier>(spec, X.cols(), mean);
    return out;
  }
  switch (spec.variant) {
    case RegressorVariant::ridge:
      out.impl_ = std::make_shared<detail::LogisticModel>(spec, X, labels);
      break;
    case RegressorVariant::kernel_ridge:
      out.impl_ = std::make_shared<detail::KernelRidgeClassifier>(spec, X, labels);
      break;
    case RegressorVariant::k_nearest:
      out.impl_ = std::make_shared<detail::KnnClassifier>(spec, X, labels);
      break;
    case RegressorVariant::mlp:
      out.impl_ = std::make_shared<detail::MlpClassifier>(spec, X, labels);
      break;
  }
  return out;
}

GradientCheckReport gradient_check(const RegressorSpec& spec, const Eigen::MatrixXd& X,
                                   const Eigen::VectorXd& y, double tolerance) {
  if (spec.variant != RegressorVariant::mlp) {
    throw std::invalid_argument("gradient_check requires the mlp variant");
  }
  detail::MlpCore net;
  net.sigmoid_head = false;
  const int h1 = detail::resolve_hidden(spec.mlp_hidden1, X.cols());
  const int h2 = detail::resolve_hidden(spec.mlp_hidden2 > 0 ? spec.mlp_hidden2 : spec.mlp_hidden1,
                                        X.cols());
  rng::Stream init_stream(rng::derive(spec.seed, "mlp-init"));
  net.l1.init(X.cols(), h1, init_stream);
  net.l2.init(h1, h2, init_stream);
  net.l3.init(h2, 1, init_stream);

  auto layers = net.layers();
  for (nn::Dense* l : layers) l->zero_grad();
  net.backprop(X, y);
  const std::vector<const nn::Dense*> clayers(layers.begin(), layers.end());
  Eigen::VectorXd analytic = nn::flatten_gradients(clayers);

  const Eigen::Index total = analytic.size();
  rng::Stream pick(rng::derive(spec.seed, "gradient-check"));
  std::vector<std::size_t> coords;
  if (total <= 50) {
    for (Eigen::Index i = 0; i < total; ++i) coords.push_back(static_cast<std::size_t>(i));
  } else {
    auto perm = pick.permutation(static_cast<std::size_t>(total));
    coords.assign(perm.begin(), perm.begin() + 50);
  }

  const double h = 1e-5;
  Eigen::VectorXd numeric(static_cast<Eigen::Index>(coords.size()));
  Eigen::VectorXd analytic_sub(static_cast<Eigen::Index>(coords.size()));
  auto loss_at = [&]() {
    detail::MlpCore probe = net;
    for (nn::Dense* l : probe.layers()) l->zero_grad();
    return probe.backprop(X, y);
  };
  for (std::size_t c = 0; c < coords.size(); ++c) {
    const auto idx = static_cast<Eigen::Index>(coords[c]);
    const double saved = nn::get_parameter(clayers, idx);
    nn::set_parameter(layers, idx, saved + h);
    const double up = loss_at();
    nn::set_parameter(layers, idx, saved - h);
    const double down = loss_at();
    nn::set_parameter(layers, idx, saved);
    numeric[static_cast<Eigen::Index>(c)] = (up - down) / (2.0 * h);
    analytic_sub[static_cast<Eigen::Index>(c)] = analytic[idx];
  }
  GradientCheckReport report;
  report.max_rel_error = nn::max_relative_gradient_error(analytic_sub, numeric);
  report.pass = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace mriv
