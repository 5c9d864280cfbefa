#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "mriv/dataset.hpp"
#include "mriv/estimators.hpp"
#include "mriv/nn.hpp"

namespace mriv {

struct MrivNetConfig {
  int hidden = 0;  // 0 selects 5 * max(p, 8)
  double learning_rate = 1e-3;
  int epochs = 100;
  int batch_size = 128;
  std::uint64_t seed = 0;
};

/// Multi-head network with two separated representations. The first
/// representation feeds the outcome and treatment component heads, the
/// second feeds the instrument-strength and propensity heads; neither block
/// reads the other's parameters.
class MrivNet {
 public:
  struct Heads {
    Eigen::VectorXd mu1_y, mu0_y;      // identity outputs on representation 1
    Eigen::VectorXd mu1_a, mu0_a;      // sigmoid outputs on representation 1
    Eigen::VectorXd t_mu1_a, t_mu0_a;  // sigmoid outputs on representation 2
    Eigen::VectorXd pi;                // sigmoid output on representation 2
  };

  MrivNet(Eigen::Index input_dim, const MrivNetConfig& cfg);

  /// Deterministic forward pass; probability heads are clamped to
  /// [1e-6, 1 - 1e-6].
  Heads forward(const Eigen::MatrixXd& X) const;

  /// Joint objective over the batch (sum over rows): squared loss on the
  /// observed-arm outcome head plus cross entropies of the observed-arm
  /// treatment heads and the propensity head.
  double loss(const Dataset& batch) const;

  /// Accumulates parameter gradients of loss(batch) / batch.n() and returns
  /// that mean loss.
  double backprop(const Dataset& batch);

  std::vector<nn::Dense*> all_layers();
  std::vector<const nn::Dense*> all_layers() const;
  std::vector<nn::Dense*> rep2_block();  // representation 2 and its heads

  Eigen::Index input_dim() const { return rep1_.weight.rows(); }

  const std::vector<double>& loss_trace() const { return loss_trace_; }

 private:
  friend MrivNet train_mrivnet(const Dataset& train, const MrivNetConfig& cfg);

  nn::Dense rep1_, rep2_;
  nn::Dense head_mu1_y_, head_mu0_y_, head_mu1_a_, head_mu0_a_;
  nn::Dense head_t_mu1_a_, head_t_mu0_a_, head_pi_;
  std::vector<double> loss_trace_;  // mean loss per observation, one entry per epoch
};

/// Joint loss over the batch, as a sum over rows.
double mrivnet_loss(const MrivNet& net, const Dataset& batch);

/// Trains the network with minibatch Adam on the joint loss. Deterministic
/// given the config seed; records a per-epoch loss trace.
MrivNet train_mrivnet(const Dataset& train, const MrivNetConfig& cfg);

/// Reads the Stage-1 nuisances off a trained network: propensity, control-arm
/// components and the instrument strength from the second representation's
/// heads, plus the plug-in initial CATE from the first representation's
/// heads (denominator clipped per the clip config).
std::pair<NuisanceSet, SurfaceFn> extract_nuisances(const MrivNet& net, const ClipConfig& clip);

/// Finite-difference check of the joint-loss gradients on a freshly
/// initialized network.
GradientCheckReport mrivnet_gradient_check(const Dataset& batch, const MrivNetConfig& cfg,
                                           double tolerance = 1e-4);

}  // namespace mriv
