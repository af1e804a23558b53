#pragma once

// Shared builders for the test suites.

#include "lfa/rng.hpp"
#include "lfa/types.hpp"

namespace lfa::test {

inline AggregatorParams make_params(EncoderKind kind, const Matrix& centers, double gamma = 1.0) {
  AggregatorParams params;
  params.kind = kind;
  params.gamma = gamma;
  params.codebook.centers = centers;
  params.precisions.log_precisions = Matrix::Zero(centers.rows(), centers.cols());
  return params;
}

inline AggregatorParams random_params(Rng& rng, EncoderKind kind, Eigen::Index k,
                                      Eigen::Index d, double gamma) {
  AggregatorParams params;
  params.kind = kind;
  params.gamma = gamma;
  params.codebook.centers.resize(k, d);
  params.precisions.log_precisions.resize(k, d);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      params.codebook.centers(r, c) = rng.uniform(-1.0, 1.0);
      params.precisions.log_precisions(r, c) =
          kind == EncoderKind::Bow ? 0.0 : rng.uniform(-1.0, 1.0);
    }
  }
  return params;
}

inline FeatureBag make_bag(const std::string& id, std::uint32_t label, const Matrix& rows) {
  FeatureBag bag;
  bag.id = id;
  bag.label = label;
  bag.descriptors = rows.cast<float>();
  return bag;
}

inline FeatureBag random_bag(Rng& rng, const std::string& id, std::uint32_t label,
                             Eigen::Index n, Eigen::Index d) {
  Matrix rows(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) rows(r, c) = rng.uniform(-1.0, 1.0);
  }
  return make_bag(id, label, rows);
}

}  // namespace lfa::test
