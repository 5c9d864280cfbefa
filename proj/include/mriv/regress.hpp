#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace mriv {

enum class RegressorVariant { ridge, kernel_ridge, k_nearest, mlp };

std::string to_string(RegressorVariant v);
RegressorVariant regressor_variant_from_string(const std::string& s);

/// Hyperparameters for one regression / probabilistic-classification backend.
/// Only the fields of the selected variant are read.
struct RegressorSpec {
  RegressorVariant variant = RegressorVariant::ridge;

  /// Ridge: penalty on the (centered) slope coefficients; intercept stays
  /// unpenalized. Kernel ridge: per-sample penalty, the solve uses
  /// ridge_penalty * n on the kernel diagonal.
  double ridge_penalty = 1e-3;

  /// Kernel ridge length-scale of the squared-exponential kernel; any value
  /// <= 0 selects the median heuristic (median pairwise training distance).
  double kernel_lengthscale = 0.0;

  int k_neighbors = 5;

  /// MLP shape: two hidden layers with ReLU; 0 selects 5 * max(p, 8).
  int mlp_hidden1 = 0;
  int mlp_hidden2 = 0;
  double mlp_learning_rate = 1e-3;
  int mlp_epochs = 100;
  int mlp_batch_size = 128;

  std::uint64_t seed = 0;

  static RegressorSpec ridge_default(double penalty = 1e-3);
  static RegressorSpec kernel_ridge_default();
  static RegressorSpec knn_default(int k = 5);
  static RegressorSpec mlp_default(std::uint64_t seed = 0);

  RegressorSpec with_seed(std::uint64_t s) const {
    RegressorSpec copy = *this;
    copy.seed = s;
    return copy;
  }
};

namespace detail {
class RegressorImpl;
class ClassifierImpl;
}  // namespace detail

/// Fitted real-valued predictor. Immutable; prediction is deterministic.
class FittedRegressor {
 public:
  FittedRegressor() = default;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  const RegressorSpec& spec() const;
  Eigen::Index input_dim() const;

 private:
  friend FittedRegressor fit_regressor(const RegressorSpec&, const Eigen::MatrixXd&,
                                       const Eigen::VectorXd&);
  std::shared_ptr<const detail::RegressorImpl> impl_;
};

/// Fitted probability predictor; outputs are clamped to [1e-6, 1 - 1e-6].
class FittedClassifier {
 public:
  FittedClassifier() = default;
  Eigen::VectorXd predict_proba(const Eigen::MatrixXd& X) const;
  const RegressorSpec& spec() const;
  Eigen::Index input_dim() const;

 private:
  friend FittedClassifier fit_classifier(const RegressorSpec&, const Eigen::MatrixXd&,
                                         const Eigen::VectorXd&, bool);
  std::shared_ptr<const detail::ClassifierImpl> impl_;
};

FittedRegressor fit_regressor(const RegressorSpec& spec, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& y);

/// Labels must be in {0,1}. With allow_constant (the default) a single-class
/// sample yields a constant classifier at the clamp boundary; otherwise it is
/// an error.
FittedClassifier fit_classifier(const RegressorSpec& spec, const Eigen::MatrixXd& X,
                                const Eigen::VectorXd& labels, bool allow_constant = true);

/// Median of all pairwise Euclidean distances between rows; falls back to 1
/// when every distance is zero.
double median_heuristic_lengthscale(const Eigen::MatrixXd& X);

struct GradientCheckReport {
  double max_rel_error = 0.0;
  bool pass = false;
};

/// Compares analytic MLP loss gradients against central finite differences
/// (step 1e-5) on a random subset of at least 50 parameter coordinates.
GradientCheckReport gradient_check(const RegressorSpec& spec, const Eigen::MatrixXd& X,
                                   const Eigen::VectorXd& y, double tolerance = 1e-4);

}  // namespace mriv
