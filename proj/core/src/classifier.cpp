#include "lfa/classifier.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "lfa/rng.hpp"

namespace lfa {

namespace {

double sech(double x) { return 1.0 / std::cosh(x); }

void check_nonnegative(const Eigen::Ref<const Vector>& x) {
  if ((x.array() < 0.0).any()) {
    throw ContractError("chi2 map: input has negative coordinates");
  }
  if (!x.allFinite()) {
    throw ContractError("chi2 map: non-finite input");
  }
}

void check_classifier_input(const Eigen::Ref<const Vector>& x, std::uint32_t y,
                            const ClassifierParams& params) {
  if (x.size() != params.input_dim()) {
    throw ContractError("classifier: input dimension mismatch");
  }
  if (static_cast<Eigen::Index>(y) >= params.num_classes()) {
    throw ContractError("classifier: label out of range");
  }
}

}  // namespace

Vector chi2_map(const Eigen::Ref<const Vector>& x, const FeatureMapConfig& cfg) {
  check_nonnegative(x);
  const int n = cfg.order;
  const double period = cfg.period;
  const Eigen::Index block = 2 * n + 1;
  Vector out(cfg.output_dim(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xt = std::max(x(i), cfg.input_floor);
    const double log_xt = std::log(xt);
    out(i * block) = std::sqrt(xt * period);  // kappa(0) = sech(0) = 1
    for (int j = 1; j <= n; ++j) {
      const double kappa = sech(std::numbers::pi * j * period);
      const double amp = std::sqrt(2.0 * xt * period * kappa);
      const double angle = j * period * log_xt;
      out(i * block + 2 * j - 1) = amp * std::cos(angle);
      out(i * block + 2 * j) = amp * std::sin(angle);
    }
  }
  return out;
}

Vector chi2_map_backward(const Eigen::Ref<const Vector>& x, const FeatureMapConfig& cfg,
                         const Eigen::Ref<const Vector>& upstream) {
  check_nonnegative(x);
  const int n = cfg.order;
  const double period = cfg.period;
  const Eigen::Index block = 2 * n + 1;
  if (upstream.size() != cfg.output_dim(x.size())) {
    throw ContractError("chi2 map backward: upstream length mismatch");
  }
  Vector dx = Vector::Zero(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) <= cfg.input_floor) continue;  // clamped region
    const double xi = x(i);
    const double log_x = std::log(xi);
    const double psi0 = std::sqrt(xi * period);
    double acc = upstream(i * block) * psi0 / (2.0 * xi);
    for (int j = 1; j <= n; ++j) {
      const double kappa = sech(std::numbers::pi * j * period);
      const double amp = std::sqrt(2.0 * xi * period * kappa);
      const double angle = j * period * log_x;
      const double psi_c = amp * std::cos(angle);
      const double psi_s = amp * std::sin(angle);
      const double freq = j * period / xi;
      acc += upstream(i * block + 2 * j - 1) * (psi_c / (2.0 * xi) - freq * psi_s);
      acc += upstream(i * block + 2 * j) * (psi_s / (2.0 * xi) + freq * psi_c);
    }
    dx(i) = acc;
  }
  return dx;
}

Vector posterior(const Eigen::Ref<const Vector>& x, const ClassifierParams& params) {
  if (x.size() != params.input_dim()) {
    throw ContractError("classifier: input dimension mismatch");
  }
  Vector logits = params.weights * x + params.biases;
  const double top = logits.maxCoeff();
  Vector p = (logits.array() - top).exp();
  p /= p.sum();
  return p;
}

double softmax_ce(const Eigen::Ref<const Vector>& x, std::uint32_t y,
                  const ClassifierParams& params) {
  check_classifier_input(x, y, params);
  const Vector logits = params.weights * x + params.biases;
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  return lse - logits(static_cast<Eigen::Index>(y));
}

CeGradients softmax_ce_backward(const Eigen::Ref<const Vector>& x, std::uint32_t y,
                                const ClassifierParams& params) {
  check_classifier_input(x, y, params);
  Vector p = posterior(x, params);
  p(static_cast<Eigen::Index>(y)) -= 1.0;
  CeGradients grads;
  grads.d_weights = p * x.transpose();
  grads.d_biases = p;
  grads.d_input = params.weights.transpose() * p;
  return grads;
}

namespace {

ClassifierParams sgd_fit(ClassifierParams params, const Matrix& design,
                         const std::vector<std::uint32_t>& labels, const FitOptions& opts) {
  const Eigen::Index n = design.rows();
  if (n < 1) throw ContractError("fit_classifier: empty dataset");
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw ContractError("fit_classifier: label count does not match design matrix rows");
  }
  for (std::uint32_t y : labels) {
    if (static_cast<Eigen::Index>(y) >= params.num_classes()) {
      throw ContractError("fit_classifier: label out of range");
    }
  }
  if (opts.batch < 1) throw ContractError("fit_classifier: batch size must be at least 1");
  if (opts.lr < 0.0) throw ContractError("fit_classifier: negative learning rate");

  Rng rng(opts.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  double prev_mean_loss = 0.0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    Eigen::Index cursor = 0;
    while (cursor < n) {
      const Eigen::Index take = std::min<Eigen::Index>(opts.batch, n - cursor);
      Matrix d_w = Matrix::Zero(params.weights.rows(), params.weights.cols());
      Vector d_b = Vector::Zero(params.biases.size());
      for (Eigen::Index i = 0; i < take; ++i) {
        const Eigen::Index row = order[static_cast<std::size_t>(cursor + i)];
        const Vector x = design.row(row).transpose();
        const std::uint32_t y = labels[static_cast<std::size_t>(row)];
        loss_sum += softmax_ce(x, y, params);
        Vector p = posterior(x, params);
        p(static_cast<Eigen::Index>(y)) -= 1.0;
        d_w += p * x.transpose();
        d_b += p;
      }
      const double inv = 1.0 / static_cast<double>(take);
      params.weights -= opts.lr * inv * d_w;
      params.biases -= opts.lr * inv * d_b;
      cursor += take;
    }
    const double mean_loss = loss_sum / static_cast<double>(n);
    if (epoch > 0 && prev_mean_loss - mean_loss < opts.min_improvement) {
      break;
    }
    prev_mean_loss = mean_loss;
  }
  return params;
}

}  // namespace

ClassifierParams fit_classifier(const Matrix& design, const std::vector<std::uint32_t>& labels,
                                Eigen::Index num_classes, const FitOptions& opts) {
  if (num_classes < 1) throw ContractError("fit_classifier: need at least one class");
  return sgd_fit(ClassifierParams::zero(num_classes, design.cols()), design, labels, opts);
}

ClassifierParams fit_classifier_warm(ClassifierParams start, const Matrix& design,
                                     const std::vector<std::uint32_t>& labels,
                                     const FitOptions& opts) {
  if (start.weights.cols() != design.cols()) {
    throw ContractError("fit_classifier_warm: design matrix width does not match parameters");
  }
  return sgd_fit(std::move(start), design, labels, opts);
}

}  // namespace lfa
