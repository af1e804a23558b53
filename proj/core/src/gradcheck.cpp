#include "lfa/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "lfa/classifier.hpp"
#include "lfa/encoder.hpp"
#include "lfa/gradients.hpp"
#include "lfa/rng.hpp"

namespace lfa {

namespace {

struct Instance {
  FeatureBag bag;
  AggregatorParams params;
  ClassifierParams classifier;
  std::uint32_t label = 0;
  std::optional<FeatureMapConfig> map;
};

Instance random_instance(Rng& rng, EncoderKind kind, bool use_map) {
  const auto d = static_cast<Eigen::Index>(1 + rng.uniform_int(5));
  const auto k = static_cast<Eigen::Index>(1 + rng.uniform_int(4));
  const auto n_f = static_cast<Eigen::Index>(1 + rng.uniform_int(6));
  const auto m = static_cast<Eigen::Index>(2 + rng.uniform_int(2));

  Instance inst;
  inst.bag.id = "gradcheck";
  inst.bag.descriptors.resize(n_f, d);
  for (Eigen::Index r = 0; r < n_f; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      inst.bag.descriptors(r, c) = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
  }
  inst.params.kind = kind;
  inst.params.gamma = rng.uniform(0.3, 1.5);
  inst.params.codebook.centers.resize(k, d);
  inst.params.precisions.log_precisions.resize(k, d);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      inst.params.codebook.centers(r, c) = rng.uniform(-1.0, 1.0);
      inst.params.precisions.log_precisions(r, c) =
          kind == EncoderKind::Bow ? 0.0 : rng.uniform(-0.7, 0.7);
    }
  }
  inst.label = static_cast<std::uint32_t>(rng.uniform_int(static_cast<std::uint64_t>(m)));
  if (use_map) inst.map = FeatureMapConfig{};
  const Eigen::Index width = inst.map.has_value()
                                 ? inst.map->output_dim(inst.params.output_dim())
                                 : inst.params.output_dim();
  inst.classifier.weights.resize(m, width);
  inst.classifier.biases.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    inst.classifier.biases(r) = rng.uniform(-0.5, 0.5);
    for (Eigen::Index c = 0; c < width; ++c) {
      inst.classifier.weights(r, c) = rng.uniform(-0.5, 0.5);
    }
  }
  return inst;
}

double pipeline_loss(const Instance& inst) {
  const Vector rep = aggregate(inst.bag, inst.params);
  const Vector mapped = inst.map.has_value() ? chi2_map(rep, *inst.map) : rep;
  return softmax_ce(mapped, inst.label, inst.classifier);
}

// Guarded relative error; below the guard this degrades to a scaled
// absolute error, which keeps fd noise on near-zero components from
// dominating the report.
double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-3});
  return std::fabs(analytic - numeric) / denom;
}

double central_difference(Instance& inst, double& slot, double step) {
  const double saved = slot;
  slot = saved + step;
  const double hi = pipeline_loss(inst);
  slot = saved - step;
  const double lo = pipeline_loss(inst);
  slot = saved;
  return (hi - lo) / (2.0 * step);
}

}  // namespace

double GradcheckReport::worst() const {
  return std::max({max_err_codebook, max_err_log_precisions, max_err_weights, max_err_map_input});
}

GradcheckReport gradcheck(const GradcheckOptions& opts) {
  if (opts.trials < 1) throw ContractError("gradcheck: trials must be at least 1");
  if (opts.encoder == EncoderKind::T2 && opts.use_chi2_map) {
    throw ContractError("gradcheck: the chi2 map needs nonnegative input, incompatible with t2");
  }
  Rng rng(derive_seed(opts.seed, "gradcheck"));
  GradcheckReport report;
  report.trials = opts.trials;

  for (int trial = 0; trial < opts.trials; ++trial) {
    Instance inst = random_instance(rng, opts.encoder, opts.use_chi2_map);

    // Analytic gradients through the full chain.
    const Vector rep = aggregate(inst.bag, inst.params);
    const Vector mapped = inst.map.has_value() ? chi2_map(rep, *inst.map) : rep;
    CeGradients ce = softmax_ce_backward(mapped, inst.label, inst.classifier);
    Vector d_rep = inst.map.has_value() ? chi2_map_backward(rep, *inst.map, ce.d_input)
                                        : Vector(ce.d_input);
    ParamGradients grads = backward_aggregate(inst.bag, inst.params, d_rep);

    if (opts.perturb && trial == 0) {
      grads.d_codebook(0, 0) += 1e-3 * (1.0 + std::fabs(grads.d_codebook(0, 0)));
    }

    for (Eigen::Index r = 0; r < inst.params.codebook.centers.rows(); ++r) {
      for (Eigen::Index c = 0; c < inst.params.codebook.centers.cols(); ++c) {
        const double numeric =
            central_difference(inst, inst.params.codebook.centers(r, c), opts.fd_step);
        report.max_err_codebook =
            std::max(report.max_err_codebook, relative_error(grads.d_codebook(r, c), numeric));
      }
    }
    if (opts.encoder != EncoderKind::Bow) {
      for (Eigen::Index r = 0; r < inst.params.precisions.log_precisions.rows(); ++r) {
        for (Eigen::Index c = 0; c < inst.params.precisions.log_precisions.cols(); ++c) {
          const double numeric = central_difference(
              inst, inst.params.precisions.log_precisions(r, c), opts.fd_step);
          report.max_err_log_precisions = std::max(
              report.max_err_log_precisions,
              relative_error(grads.d_log_precisions(r, c), numeric));
        }
      }
    }
    for (Eigen::Index r = 0; r < inst.classifier.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < inst.classifier.weights.cols(); ++c) {
        const double numeric =
            central_difference(inst, inst.classifier.weights(r, c), opts.fd_step);
        report.max_err_weights =
            std::max(report.max_err_weights, relative_error(ce.d_weights(r, c), numeric));
      }
      const double numeric = central_difference(inst, inst.classifier.biases(r), opts.fd_step);
      report.max_err_weights =
          std::max(report.max_err_weights, relative_error(ce.d_biases(r), numeric));
    }

    if (inst.map.has_value()) {
      // d loss / d (map input), checked by perturbing the representation
      // that feeds the map. Components too close to zero cannot be
      // central-differenced without crossing the map's domain boundary.
      Vector x = rep;
      const Vector d_x = chi2_map_backward(x, *inst.map, ce.d_input);
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x(i) < 1e-4) continue;
        const double saved = x(i);
        x(i) = saved + opts.fd_step;
        const double hi = softmax_ce(chi2_map(x, *inst.map), inst.label, inst.classifier);
        x(i) = saved - opts.fd_step;
        const double lo = softmax_ce(chi2_map(x, *inst.map), inst.label, inst.classifier);
        x(i) = saved;
        const double numeric = (hi - lo) / (2.0 * opts.fd_step);
        report.max_err_map_input =
            std::max(report.max_err_map_input, relative_error(d_x(i), numeric));
      }
    }
  }
  return report;
}

}  // namespace lfa
