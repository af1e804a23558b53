#pragma once

#include "lfa/types.hpp"

namespace lfa {

/// Log kernel response of feature f against codeword k:
///   -gamma * sum_d exp(log_precision[k,d]) * (f_d - C[k,d])^2
/// Always <= 0; exactly 0 iff f == C_k.
double kernel_log_response(const Eigen::Ref<const Vector>& f, const AggregatorParams& params,
                           Eigen::Index k);

/// Responsibilities of the K codewords for one feature: a softmax over the
/// kernel log responses. Computed with log-sum-exp so large gamma (the
/// kernels underflow in direct form well before gamma = 70) stays exact.
/// Valid for Bow and T1 parameter sets; output lies on the simplex.
Vector encode_t1(const Eigen::Ref<const Vector>& f, const AggregatorParams& params);

/// Responsibility-weighted residuals: block k of the output (length K*D)
/// is w_k * (f - C_k) with w the encode_t1 responsibilities.
Vector encode_t2(const Eigen::Ref<const Vector>& f, const AggregatorParams& params);

/// Dispatches on params.kind.
Vector encode(const Eigen::Ref<const Vector>& f, const AggregatorParams& params);

/// Bag-level representation: arithmetic mean of per-feature encodings,
/// accumulated in ascending feature order. Throws on an empty bag.
Vector aggregate(const FeatureBag& bag, const AggregatorParams& params);

}  // namespace lfa
