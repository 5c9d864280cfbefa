#include "mriv/netlearn.hpp"

#include <cmath>
#include <stdexcept>

#include "mriv/rng.hpp"

namespace mriv {

namespace {

int resolve_hidden(int requested, Eigen::Index p) {
  if (requested > 0) return requested;
  return 5 * static_cast<int>(std::max<Eigen::Index>(p, 8));
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

MrivNet::MrivNet(Eigen::Index input_dim, const MrivNetConfig& cfg) {
  const int h = resolve_hidden(cfg.hidden, input_dim);
  rng::Stream s(rng::derive(cfg.seed, "mrivnet-init"));
  rep1_.init(input_dim, h, s);
  head_mu1_y_.init(h, 1, s);
  head_mu0_y_.init(h, 1, s);
  head_mu1_a_.init(h, 1, s);
  head_mu0_a_.init(h, 1, s);
  rep2_.init(input_dim, h, s);
  head_t_mu1_a_.init(h, 1, s);
  head_t_mu0_a_.init(h, 1, s);
  head_pi_.init(h, 1, s);
}

std::vector<nn::Dense*> MrivNet::all_layers() {
  return {&rep1_, &head_mu1_y_, &head_mu0_y_, &head_mu1_a_, &head_mu0_a_,
          &rep2_, &head_t_mu1_a_, &head_t_mu0_a_, &head_pi_};
}

std::vector<const nn::Dense*> MrivNet::all_layers() const {
  return {&rep1_, &head_mu1_y_, &head_mu0_y_, &head_mu1_a_, &head_mu0_a_,
          &rep2_, &head_t_mu1_a_, &head_t_mu0_a_, &head_pi_};
}

std::vector<nn::Dense*> MrivNet::rep2_block() {
  return {&rep2_, &head_t_mu1_a_, &head_t_mu0_a_, &head_pi_};
}

MrivNet::Heads MrivNet::forward(const Eigen::MatrixXd& X) const {
  if (X.cols() != input_dim()) throw std::invalid_argument("MrivNet: dimension mismatch");
  Eigen::MatrixXd h1 = nn::relu(rep1_.forward(X));
  Eigen::MatrixXd h2 = nn::relu(rep2_.forward(X));
  Heads out;
  out.mu1_y = head_mu1_y_.forward(h1).col(0);
  out.mu0_y = head_mu0_y_.forward(h1).col(0);
  auto squash = [](Eigen::VectorXd z) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = nn::clamp_prob(sigmoid(z[i]));
    return z;
  };
  out.mu1_a = squash(head_mu1_a_.forward(h1).col(0));
  out.mu0_a = squash(head_mu0_a_.forward(h1).col(0));
  out.t_mu1_a = squash(head_t_mu1_a_.forward(h2).col(0));
  out.t_mu0_a = squash(head_t_mu0_a_.forward(h2).col(0));
  out.pi = squash(head_pi_.forward(h2).col(0));
  return out;
}

double MrivNet::loss(const Dataset& batch) const {
  Heads heads = forward(batch.covariates);
  double total = 0.0;
  for (Eigen::Index i = 0; i < batch.n(); ++i) {
    const bool z1 = batch.instrument[i] == 1.0;
    const double mu_y = z1 ? heads.mu1_y[i] : heads.mu0_y[i];
    const double mu_a = z1 ? heads.mu1_a[i] : heads.mu0_a[i];
    const double t_mu_a = z1 ? heads.t_mu1_a[i] : heads.t_mu0_a[i];
    const double r = mu_y - batch.outcome[i];
    total += r * r;
    total += nn::bce(mu_a, batch.treatment[i]);
    total += nn::bce(t_mu_a, batch.treatment[i]);
    total += nn::bce(heads.pi[i], batch.instrument[i]);
  }
  return total;
}

double MrivNet::backprop(const Dataset& batch) {
  const Eigen::Index b = batch.n();
  const double inv_b = 1.0 / static_cast<double>(b);
  const Eigen::MatrixXd& X = batch.covariates;

  Eigen::MatrixXd z1 = rep1_.forward(X);
  Eigen::MatrixXd h1 = nn::relu(z1);
  Eigen::MatrixXd z2 = rep2_.forward(X);
  Eigen::MatrixXd h2 = nn::relu(z2);

  Eigen::VectorXd o_mu1y = head_mu1_y_.forward(h1).col(0);
  Eigen::VectorXd o_mu0y = head_mu0_y_.forward(h1).col(0);
  Eigen::VectorXd o_mu1a = head_mu1_a_.forward(h1).col(0);
  Eigen::VectorXd o_mu0a = head_mu0_a_.forward(h1).col(0);
  Eigen::VectorXd o_tmu1a = head_t_mu1_a_.forward(h2).col(0);
  Eigen::VectorXd o_tmu0a = head_t_mu0_a_.forward(h2).col(0);
  Eigen::VectorXd o_pi = head_pi_.forward(h2).col(0);

  Eigen::MatrixXd g_mu1y = Eigen::MatrixXd::Zero(b, 1), g_mu0y = g_mu1y;
  Eigen::MatrixXd g_mu1a = g_mu1y, g_mu0a = g_mu1y, g_tmu1a = g_mu1y, g_tmu0a = g_mu1y;
  Eigen::MatrixXd g_pi(b, 1);

  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const bool arm1 = batch.instrument[i] == 1.0;
    const double y = batch.outcome[i];
    const double a = batch.treatment[i];
    const double zlab = batch.instrument[i];

    // Arm-indexed heads: only the observed arm's head receives gradient.
    const double out_y = arm1 ? o_mu1y[i] : o_mu0y[i];
    const double r = out_y - y;
    total += r * r;
    (arm1 ? g_mu1y : g_mu0y)(i, 0) = 2.0 * r * inv_b;

    const double pa = sigmoid(arm1 ? o_mu1a[i] : o_mu0a[i]);
    total += nn::bce(pa, a);
    (arm1 ? g_mu1a : g_mu0a)(i, 0) = (pa - a) * inv_b;

    const double tpa = sigmoid(arm1 ? o_tmu1a[i] : o_tmu0a[i]);
    total += nn::bce(tpa, a);
    (arm1 ? g_tmu1a : g_tmu0a)(i, 0) = (tpa - a) * inv_b;

    const double pp = sigmoid(o_pi[i]);
    total += nn::bce(pp, zlab);
    g_pi(i, 0) = (pp - zlab) * inv_b;
  }

  Eigen::MatrixXd grad_h1 = head_mu1_y_.backward(h1, g_mu1y);
  grad_h1 += head_mu0_y_.backward(h1, g_mu0y);
  grad_h1 += head_mu1_a_.backward(h1, g_mu1a);
  grad_h1 += head_mu0_a_.backward(h1, g_mu0a);
  rep1_.backward(X, nn::relu_backward(z1, grad_h1));

  Eigen::MatrixXd grad_h2 = head_t_mu1_a_.backward(h2, g_tmu1a);
  grad_h2 += head_t_mu0_a_.backward(h2, g_tmu0a);
  grad_h2 += head_pi_.backward(h2, g_pi);
  rep2_.backward(X, nn::relu_backward(z2, grad_h2));

  return total * inv_b;
}

double mrivnet_loss(const MrivNet& net, const Dataset& batch) {
  if (batch.n() < 1) throw std::invalid_argument("mrivnet_loss: empty batch");
  return net.loss(batch);
}

MrivNet train_mrivnet(const Dataset& train, const MrivNetConfig& cfg) {
  require_valid(train);
  MrivNet net(train.p(), cfg);
  nn::Adam opt(cfg.learning_rate);
  opt.attach(net.all_layers());

  rng::Stream shuffle_stream(rng::derive(cfg.seed, "mrivnet-shuffle"));
  const auto n = static_cast<std::size_t>(train.n());
  const auto batch_size = static_cast<std::size_t>(std::max(1, cfg.batch_size));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto perm = shuffle_stream.permutation(n);
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t bsz = std::min(batch_size, n - start);
      std::vector<Eigen::Index> rows(bsz);
      for (std::size_t i = 0; i < bsz; ++i) rows[i] = static_cast<Eigen::Index>(perm[start + i]);
      Dataset batch = train.subset(rows);
      for (nn::Dense* l : net.all_layers()) l->zero_grad();
      const double mean_loss = net.backprop(batch);
      if (!std::isfinite(mean_loss)) {
        throw std::runtime_error("mrivnet training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch));
      }
      opt.step();
    }
    net.loss_trace_.push_back(net.loss(train) / static_cast<double>(train.n()));
  }
  return net;
}

std::pair<NuisanceSet, SurfaceFn> extract_nuisances(const MrivNet& net, const ClipConfig& clip) {
  auto shared = std::make_shared<const MrivNet>(net);
  NuisanceSet nuis;
  nuis.pi_hat = [shared, clip](const Eigen::MatrixXd& X) {
    Eigen::VectorXd p = shared->forward(X).pi;
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = clip.clip_propensity(p[i]);
    return p;
  };
  nuis.mu0_y_hat = [shared](const Eigen::MatrixXd& X) { return shared->forward(X).mu0_y; };
  nuis.mu1_y_hat = [shared](const Eigen::MatrixXd& X) { return shared->forward(X).mu1_y; };
  nuis.mu0_a_hat = [shared](const Eigen::MatrixXd& X) { return shared->forward(X).mu0_a; };
  nuis.mu1_a_hat = [shared](const Eigen::MatrixXd& X) { return shared->forward(X).mu1_a; };
  // Instrument strength from the second representation's heads, not from the
  // component heads.
  nuis.delta_a_hat = [shared, clip](const Eigen::MatrixXd& X) {
    MrivNet::Heads h = shared->forward(X);
    Eigen::VectorXd d = h.t_mu1_a - h.t_mu0_a;
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = clip.clip_delta(d[i]);
    return d;
  };
  SurfaceFn tau_init = [shared, clip](const Eigen::MatrixXd& X) {
    MrivNet::Heads h = shared->forward(X);
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      out[i] = clip.clip_tau((h.mu1_y[i] - h.mu0_y[i]) / clip.clip_delta(h.mu1_a[i] - h.mu0_a[i]));
    }
    return out;
  };
  return {std::move(nuis), std::move(tau_init)};
}

GradientCheckReport mrivnet_gradient_check(const Dataset& batch, const MrivNetConfig& cfg,
                                           double tolerance) {
  MrivNet net(batch.p(), cfg);
  auto layers = net.all_layers();
  for (nn::Dense* l : layers) l->zero_grad();
  net.backprop(batch);
  const std::vector<const nn::Dense*> clayers(layers.begin(), layers.end());
  Eigen::VectorXd analytic = nn::flatten_gradients(clayers);

  const Eigen::Index total = analytic.size();
  rng::Stream pick(rng::derive(cfg.seed, "mrivnet-gradient-check"));
  std::vector<std::size_t> coords;
  if (total <= 50) {
    for (Eigen::Index i = 0; i < total; ++i) coords.push_back(static_cast<std::size_t>(i));
  } else {
    auto perm = pick.permutation(static_cast<std::size_t>(total));
    coords.assign(perm.begin(), perm.begin() + 50);
  }

  const double h = 1e-5;
  const double inv_b = 1.0 / static_cast<double>(batch.n());
  Eigen::VectorXd numeric(static_cast<Eigen::Index>(coords.size()));
  Eigen::VectorXd analytic_sub(static_cast<Eigen::Index>(coords.size()));
  for (std::size_t c = 0; c < coords.size(); ++c) {
    const auto idx = static_cast<Eigen::Index>(coords[c]);
    const double saved = nn::get_parameter(clayers, idx);
    nn::set_parameter(layers, idx, saved + h);
    const double up = net.loss(batch) * inv_b;
    nn::set_parameter(layers, idx, saved - h);
    const double down = net.loss(batch) * inv_b;
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
