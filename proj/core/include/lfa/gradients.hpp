#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lfa/types.hpp"

namespace lfa {

/// Gradients of a scalar functional with respect to the aggregator
/// parameters. Same shapes as the parameters they differentiate.
struct ParamGradients {
  Matrix d_codebook;        // K x D
  Matrix d_log_precisions;  // K x D

  static ParamGradients zero(Eigen::Index k, Eigen::Index d) {
    return {Matrix::Zero(k, d), Matrix::Zero(k, d)};
  }
};

/// Random subset of a bag's features for the subsampled gradient estimator.
struct SubsampleSpec {
  Eigen::Index sample_size = 1024;
  std::uint64_t seed = 0;
  bool replacement = false;
};

/// Exact gradient of <upstream, T(f; params)> with respect to codebook and
/// log-precisions. upstream must match the encoder output length.
ParamGradients backward_encode(const Eigen::Ref<const Vector>& f, const AggregatorParams& params,
                               const Eigen::Ref<const Vector>& upstream);

/// Gradient of <upstream, R(bag; params)>. Without a subsample spec this is
/// the exact mean of per-feature gradients; with one it is the unbiased
/// estimator over the sampled subset. Terms accumulate in ascending feature
/// order, so a full-sized sample without replacement reproduces the full
/// gradient bitwise.
ParamGradients backward_aggregate(const FeatureBag& bag, const AggregatorParams& params,
                                  const Eigen::Ref<const Vector>& upstream,
                                  const std::optional<SubsampleSpec>& subsample = std::nullopt);

/// Feature-row indices drawn by a subsample spec, sorted ascending.
/// Exposed so the training loop can sample a bag once and reuse the same
/// subset for the forward and backward pass.
std::vector<Eigen::Index> subsample_indices(Eigen::Index bag_size, const SubsampleSpec& spec);

}  // namespace lfa
