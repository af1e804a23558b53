#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <string_view>

#include "lfa/errors.hpp"

namespace lfa {

// Row-major storage throughout: one codeword / one descriptor is a
// contiguous scan.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FloatMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// One sample: a bag of local descriptors plus its class label.
/// Descriptors are stored as float rows (the on-disk payload type); all
/// arithmetic happens in double.
struct FeatureBag {
  std::string id;
  std::uint32_t label = 0;
  FloatMatrix descriptors;  // N_F x D, one local feature per row

  Eigen::Index size() const { return descriptors.rows(); }
  Eigen::Index dim() const { return descriptors.cols(); }
};

enum class EncoderKind { Bow, T1, T2 };

const char* to_string(EncoderKind kind);
EncoderKind encoder_kind_from_string(std::string_view name);

/// K prototype vectors, row k is codeword k.
struct Codebook {
  Matrix centers;  // K x D
};

/// Row k holds the elementwise log of the diagonal of the k-th inverse
/// covariance. Effective precisions exp(row) stay positive under
/// unconstrained gradient updates.
struct PrecisionBank {
  Matrix log_precisions;  // K x D
};

/// Full parameter set of an aggregation function.
struct AggregatorParams {
  EncoderKind kind = EncoderKind::T1;
  Codebook codebook;
  PrecisionBank precisions;
  double gamma = 1.0;

  Eigen::Index codeword_count() const { return codebook.centers.rows(); }
  Eigen::Index dim() const { return codebook.centers.cols(); }

  /// K for Bow/T1, K*D for T2.
  Eigen::Index output_dim() const {
    return kind == EncoderKind::T2 ? codeword_count() * dim() : codeword_count();
  }

  /// Throws ContractError on shape mismatch, non-finite entries,
  /// non-positive gamma, or a Bow parameter set with non-identity covariance.
  void validate() const;
};

}  // namespace lfa
