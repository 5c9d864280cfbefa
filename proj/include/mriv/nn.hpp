#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mriv/rng.hpp"

namespace mriv::nn {

/// Numeric floor keeping probabilities strictly inside (0,1); also the clamp
/// applied to every probability-valued prediction.
inline constexpr double kProbClamp = 1e-6;

inline double clamp_prob(double p) {
  return p < kProbClamp ? kProbClamp : (p > 1.0 - kProbClamp ? 1.0 - kProbClamp : p);
}

inline Eigen::VectorXd clamp_prob(Eigen::VectorXd v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = clamp_prob(v[i]);
  return v;
}

inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

/// Binary cross entropy of a clamped probability against a {0,1} label.
inline double bce(double p, double label) {
  p = clamp_prob(p);
  return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

/// Fully connected layer with explicit forward/backward passes.
struct Dense {
  Eigen::MatrixXd weight;  // in x out
  Eigen::VectorXd bias;    // out
  Eigen::MatrixXd grad_weight;
  Eigen::VectorXd grad_bias;

  void init(Eigen::Index in, Eigen::Index out, rng::Stream& stream);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const {
    return (input * weight).rowwise() + bias.transpose();
  }

  /// Accumulates parameter gradients for the given upstream gradient and
  /// returns the gradient with respect to the input.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& input, const Eigen::MatrixXd& grad_out) {
    grad_weight.noalias() += input.transpose() * grad_out;
    grad_bias.noalias() += grad_out.colwise().sum().transpose();
    return grad_out * weight.transpose();
  }

  void zero_grad() {
    grad_weight.setZero();
    grad_bias.setZero();
  }

  Eigen::Index parameter_count() const { return weight.size() + bias.size(); }
};

inline Eigen::MatrixXd relu(const Eigen::MatrixXd& z) {
  return z.cwiseMax(0.0);
}

inline Eigen::MatrixXd relu_backward(const Eigen::MatrixXd& pre, const Eigen::MatrixXd& grad_out) {
  return (pre.array() > 0.0).select(grad_out, Eigen::MatrixXd::Zero(grad_out.rows(), grad_out.cols()));
}

/// Adaptive moment optimizer over a set of registered layers.
class Adam {
 public:
  Adam(double learning_rate = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void attach(std::vector<Dense*> layers);
  void step();

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Dense*> layers_;
  std::vector<Eigen::MatrixXd> mw_, vw_;
  std::vector<Eigen::VectorXd> mb_, vb_;
};

/// Views every parameter of the given layers as one flat vector; used by the
/// finite-difference gradient checks.
Eigen::VectorXd flatten_parameters(const std::vector<const Dense*>& layers);
Eigen::VectorXd flatten_gradients(const std::vector<const Dense*>& layers);
void set_parameter(std::vector<Dense*>& layers, Eigen::Index flat_index, double value);
double get_parameter(const std::vector<const Dense*>& layers, Eigen::Index flat_index);

/// Max relative error between analytic and numeric gradients over a random
/// subset of coordinates. Both-below-1e-12 pairs count as zero error.
double max_relative_gradient_error(const Eigen::VectorXd& analytic,
                                   const Eigen::VectorXd& numeric);

}  // namespace mriv::nn
