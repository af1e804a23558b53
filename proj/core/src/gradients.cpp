#include "lfa/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lfa/rng.hpp"

namespace lfa {

namespace {

// Shared forward pieces for one feature: responsibilities w, residuals,
// and elementwise precisions. Row-major K x D throughout.
struct EncodeState {
  Vector w;            // K responsibilities
  Matrix residuals;    // K x D, row k = f - C_k
  Matrix precisions;   // K x D, exp(log_precisions)
};

EncodeState forward_state(const Eigen::Ref<const Vector>& f, const AggregatorParams& params) {
  const Eigen::Index k_count = params.codeword_count();
  EncodeState st;
  st.residuals = (-params.codebook.centers).rowwise() + f.transpose();
  st.precisions = params.precisions.log_precisions.array().exp();
  Vector s(k_count);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    s(k) = -params.gamma *
           (st.precisions.row(k).array() * st.residuals.row(k).array().square()).sum();
  }
  const double top = s.maxCoeff();
  st.w = (s.array() - top).exp();
  st.w /= st.w.sum();
  return st;
}

// Adds weight * d<upstream, T(f)>/dTheta to grads.
void accumulate_backward(const Eigen::Ref<const Vector>& f, const AggregatorParams& params,
                         const Eigen::Ref<const Vector>& upstream, double weight,
                         ParamGradients& grads) {
  if (f.size() != params.dim()) {
    throw ContractError("backward_encode: feature dimension mismatch");
  }
  if (upstream.size() != params.output_dim()) {
    throw ContractError("backward_encode: upstream length " + std::to_string(upstream.size()) +
                        " does not match encoder output length " +
                        std::to_string(params.output_dim()));
  }

  const EncodeState st = forward_state(f, params);
  const Eigen::Index k_count = params.codeword_count();
  const Eigen::Index d = params.dim();
  const double gamma = params.gamma;

  if (params.kind == EncoderKind::T2) {
    // L = sum_k w_k <u_k, r_k>. The softmax path contributes through
    // a_k = <u_k, r_k>; the residual path contributes -w_k u_k directly.
    Vector a(k_count);
    for (Eigen::Index k = 0; k < k_count; ++k) {
      a(k) = upstream.segment(k * d, d).dot(st.residuals.row(k).transpose());
    }
    const double a_bar = st.w.dot(a);
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const double g = st.w(k) * (a(k) - a_bar);
      const auto r = st.residuals.row(k).array();
      const auto p = st.precisions.row(k).array();
      const auto u = upstream.segment(k * d, d).transpose().array();
      grads.d_codebook.row(k).array() += weight * (-st.w(k) * u + g * 2.0 * gamma * p * r);
      grads.d_log_precisions.row(k).array() += weight * (-g * gamma * p * r.square());
    }
  } else {
    // L = sum_k u_k w_k; softmax Jacobian gives dL/ds_k = w_k (u_k - ubar).
    const double u_bar = st.w.dot(upstream);
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const double g = st.w(k) * (upstream(k) - u_bar);
      const auto r = st.residuals.row(k).array();
      const auto p = st.precisions.row(k).array();
      grads.d_codebook.row(k).array() += weight * (g * 2.0 * gamma * p * r);
      grads.d_log_precisions.row(k).array() += weight * (-g * gamma * p * r.square());
    }
  }
}

}  // namespace

ParamGradients backward_encode(const Eigen::Ref<const Vector>& f, const AggregatorParams& params,
                               const Eigen::Ref<const Vector>& upstream) {
  ParamGradients grads = ParamGradients::zero(params.codeword_count(), params.dim());
  accumulate_backward(f, params, upstream, 1.0, grads);
  return grads;
}

std::vector<Eigen::Index> subsample_indices(Eigen::Index bag_size, const SubsampleSpec& spec) {
  if (spec.sample_size < 1) {
    throw ContractError("subsample: sample size must be at least 1");
  }
  Rng rng(spec.seed);
  std::vector<Eigen::Index> indices;
  indices.reserve(static_cast<std::size_t>(spec.sample_size));
  if (spec.replacement) {
    for (Eigen::Index i = 0; i < spec.sample_size; ++i) {
      indices.push_back(static_cast<Eigen::Index>(rng.uniform_int(bag_size)));
    }
  } else {
    if (spec.sample_size > bag_size) {
      throw ContractError("subsample: sample size exceeds bag size without replacement");
    }
    std::vector<Eigen::Index> all(static_cast<std::size_t>(bag_size));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    // Partial Fisher-Yates: the first sample_size slots are the sample.
    for (Eigen::Index i = 0; i < spec.sample_size; ++i) {
      const auto j = i + static_cast<Eigen::Index>(rng.uniform_int(bag_size - i));
      std::swap(all[i], all[j]);
    }
    indices.assign(all.begin(), all.begin() + spec.sample_size);
  }
  std::sort(indices.begin(), indices.end());
  return indices;
}

ParamGradients backward_aggregate(const FeatureBag& bag, const AggregatorParams& params,
                                  const Eigen::Ref<const Vector>& upstream,
                                  const std::optional<SubsampleSpec>& subsample) {
  if (bag.size() < 1) {
    throw ContractError("backward_aggregate: empty bag '" + bag.id + "'");
  }
  std::vector<Eigen::Index> indices;
  if (subsample.has_value()) {
    indices = subsample_indices(bag.size(), *subsample);
  } else {
    indices.resize(static_cast<std::size_t>(bag.size()));
    std::iota(indices.begin(), indices.end(), Eigen::Index{0});
  }

  ParamGradients grads = ParamGradients::zero(params.codeword_count(), params.dim());
  for (const Eigen::Index n : indices) {
    const Vector f = bag.descriptors.row(n).cast<double>().transpose();
    accumulate_backward(f, params, upstream, 1.0, grads);
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  grads.d_codebook *= inv;
  grads.d_log_precisions *= inv;
  return grads;
}

}  // namespace lfa
