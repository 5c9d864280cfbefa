#include "mriv/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace mriv::nn {

void Dense::init(Eigen::Index in, Eigen::Index out, rng::Stream& stream) {
  weight.resize(in, out);
  const double scale = std::sqrt(2.0 / static_cast<double>(in));
  for (Eigen::Index i = 0; i < in; ++i) {
    for (Eigen::Index j = 0; j < out; ++j) weight(i, j) = scale * stream.normal();
  }
  bias = Eigen::VectorXd::Zero(out);
  grad_weight = Eigen::MatrixXd::Zero(in, out);
  grad_bias = Eigen::VectorXd::Zero(out);
}

void Adam::attach(std::vector<Dense*> layers) {
  layers_ = std::move(layers);
  mw_.clear();
  vw_.clear();
  mb_.clear();
  vb_.clear();
  for (Dense* l : layers_) {
    mw_.push_back(Eigen::MatrixXd::Zero(l->weight.rows(), l->weight.cols()));
    vw_.push_back(Eigen::MatrixXd::Zero(l->weight.rows(), l->weight.cols()));
    mb_.push_back(Eigen::VectorXd::Zero(l->bias.size()));
    vb_.push_back(Eigen::VectorXd::Zero(l->bias.size()));
  }
  t_ = 0;
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    Dense* l = layers_[k];
    mw_[k] = beta1_ * mw_[k] + (1.0 - beta1_) * l->grad_weight;
    vw_[k] = beta2_ * vw_[k].array().matrix() +
             (1.0 - beta2_) * l->grad_weight.array().square().matrix();
    l->weight.array() -=
        lr_ * (mw_[k].array() / c1) / ((vw_[k].array() / c2).sqrt() + eps_);
    mb_[k] = beta1_ * mb_[k] + (1.0 - beta1_) * l->grad_bias;
    vb_[k] = beta2_ * vb_[k].array().matrix() +
             (1.0 - beta2_) * l->grad_bias.array().square().matrix();
    l->bias.array() -= lr_ * (mb_[k].array() / c1) / ((vb_[k].array() / c2).sqrt() + eps_);
  }
}

Eigen::VectorXd flatten_parameters(const std::vector<const Dense*>& layers) {
  Eigen::Index total = 0;
  for (const Dense* l : layers) total += l->parameter_count();
  Eigen::VectorXd flat(total);
  Eigen::Index at = 0;
  for (const Dense* l : layers) {
    flat.segment(at, l->weight.size()) =
        Eigen::Map<const Eigen::VectorXd>(l->weight.data(), l->weight.size());
    at += l->weight.size();
    flat.segment(at, l->bias.size()) = l->bias;
    at += l->bias.size();
  }
  return flat;
}

Eigen::VectorXd flatten_gradients(const std::vector<const Dense*>& layers) {
  Eigen::Index total = 0;
  for (const Dense* l : layers) total += l->parameter_count();
  Eigen::VectorXd flat(total);
  Eigen::Index at = 0;
  for (const Dense* l : layers) {
    flat.segment(at, l->grad_weight.size()) =
        Eigen::Map<const Eigen::VectorXd>(l->grad_weight.data(), l->grad_weight.size());
    at += l->grad_weight.size();
    flat.segment(at, l->grad_bias.size()) = l->grad_bias;
    at += l->grad_bias.size();
  }
  return flat;
}

void set_parameter(std::vector<Dense*>& layers, Eigen::Index flat_index, double value) {
  for (Dense* l : layers) {
    if (flat_index < l->weight.size()) {
      l->weight.data()[flat_index] = value;
      return;
    }
    flat_index -= l->weight.size();
    if (flat_index < l->bias.size()) {
      l->bias[flat_index] = value;
      return;
    }
    flat_index -= l->bias.size();
  }
  throw std::out_of_range("flat parameter index out of range");
}

double get_parameter(const std::vector<const Dense*>& layers, Eigen::Index flat_index) {
  for (const Dense* l : layers) {
    if (flat_index < l->weight.size()) return l->weight.data()[flat_index];
    flat_index -= l->weight.size();
    if (flat_index < l->bias.size()) return l->bias[flat_index];
    flat_index -= l->bias.size();
  }
  throw std::out_of_range("flat parameter index out of range");
}

double max_relative_gradient_error(const Eigen::VectorXd& analytic,
                                   const Eigen::VectorXd& numeric) {
  if (analytic.size() != numeric.size()) {
    throw std::invalid_argument("gradient length mismatch");
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    if (std::fabs(a) < 1e-12 && std::fabs(n) < 1e-12) continue;
    const double rel = std::fabs(a - n) / std::max(std::fabs(a), std::fabs(n));
    if (rel > worst) worst = rel;
  }
  return worst;
}

}  // namespace mriv::nn
