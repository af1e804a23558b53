#include "lfa/encoder.hpp"

#include <cmath>

namespace lfa {

namespace {

void check_feature(const Eigen::Ref<const Vector>& f, const AggregatorParams& params) {
  if (f.size() != params.dim()) {
    throw ContractError("encoder: feature dimension " + std::to_string(f.size()) +
                        " does not match codebook dimension " + std::to_string(params.dim()));
  }
  if (!f.allFinite()) {
    throw ContractError("encoder: non-finite feature");
  }
}

Vector log_responses(const Eigen::Ref<const Vector>& f, const AggregatorParams& params) {
  const Eigen::Index k_count = params.codeword_count();
  Vector s(k_count);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const auto diff = f.transpose() - params.codebook.centers.row(k);
    const auto prec = params.precisions.log_precisions.row(k).array().exp();
    s(k) = -params.gamma * (prec * diff.array().square()).sum();
  }
  return s;
}

Vector softmax(const Vector& s) {
  const double top = s.maxCoeff();
  Vector w = (s.array() - top).exp();
  w /= w.sum();
  return w;
}

}  // namespace

double kernel_log_response(const Eigen::Ref<const Vector>& f, const AggregatorParams& params,
                           Eigen::Index k) {
  check_feature(f, params);
  if (k < 0 || k >= params.codeword_count()) {
    throw ContractError("kernel_log_response: codeword index out of range");
  }
  const auto diff = f.transpose() - params.codebook.centers.row(k);
  const auto prec = params.precisions.log_precisions.row(k).array().exp();
  return -params.gamma * (prec * diff.array().square()).sum();
}

Vector encode_t1(const Eigen::Ref<const Vector>& f, const AggregatorParams& params) {
  if (params.kind == EncoderKind::T2) {
    throw ContractError("encode_t1: parameter set is for a T2 encoder");
  }
  check_feature(f, params);
  return softmax(log_responses(f, params));
}

Vector encode_t2(const Eigen::Ref<const Vector>& f, const AggregatorParams& params) {
  if (params.kind != EncoderKind::T2) {
    throw ContractError("encode_t2: parameter set is not for a T2 encoder");
  }
  check_feature(f, params);
  const Vector w = softmax(log_responses(f, params));
  const Eigen::Index d = params.dim();
  Vector out(params.output_dim());
  for (Eigen::Index k = 0; k < params.codeword_count(); ++k) {
    out.segment(k * d, d) =
        w(k) * (f.transpose() - params.codebook.centers.row(k)).transpose();
  }
  return out;
}

Vector encode(const Eigen::Ref<const Vector>& f, const AggregatorParams& params) {
  return params.kind == EncoderKind::T2 ? encode_t2(f, params) : encode_t1(f, params);
}

Vector aggregate(const FeatureBag& bag, const AggregatorParams& params) {
  if (bag.size() < 1) {
    throw ContractError("aggregate: empty bag '" + bag.id + "'");
  }
  if (bag.dim() != params.dim()) {
    throw ContractError("aggregate: bag dimension " + std::to_string(bag.dim()) +
                        " does not match codebook dimension " + std::to_string(params.dim()));
  }
  Vector sum = Vector::Zero(params.output_dim());
  for (Eigen::Index n = 0; n < bag.size(); ++n) {
    const Vector f = bag.descriptors.row(n).cast<double>().transpose();
    sum += encode(f, params);
  }
  return sum / static_cast<double>(bag.size());
}

}  // namespace lfa
