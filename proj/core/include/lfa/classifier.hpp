#pragma once

#include <cstdint>
#include <vector>

#include "lfa/types.hpp"

namespace lfa {

/// Multiclass logistic regression parameters. One weight row and one bias
/// per class.
struct ClassifierParams {
  Matrix weights;  // M x D_in
  Vector biases;   // M

  static ClassifierParams zero(Eigen::Index num_classes, Eigen::Index input_dim) {
    return {Matrix::Zero(num_classes, input_dim), Vector::Zero(num_classes)};
  }

  Eigen::Index num_classes() const { return weights.rows(); }
  Eigen::Index input_dim() const { return weights.cols(); }
};

/// Explicit approximate feature map for the additive chi-squared kernel.
/// Each nonnegative input coordinate expands to 2*order+1 outputs sampled at
/// frequencies j*period, j = 0..order. Inputs are clamped below at
/// input_floor before the log, which keeps the map finite at zero.
struct FeatureMapConfig {
  int order = 2;
  double period = 0.5;
  double input_floor = 1e-10;

  Eigen::Index output_dim(Eigen::Index input_dim) const {
    return static_cast<Eigen::Index>(2 * order + 1) * input_dim;
  }
};

/// Maps a nonnegative vector; output block i (length 2n+1) encodes
/// coordinate i. Throws ContractError on negative input.
Vector chi2_map(const Eigen::Ref<const Vector>& x, const FeatureMapConfig& cfg);

/// Jacobian-transpose product of chi2_map. Coordinates at or below the
/// input floor get a zero gradient (they sit in the clamped region).
Vector chi2_map_backward(const Eigen::Ref<const Vector>& x, const FeatureMapConfig& cfg,
                         const Eigen::Ref<const Vector>& upstream);

/// Softmax posterior over classes for input x.
Vector posterior(const Eigen::Ref<const Vector>& x, const ClassifierParams& params);

/// Cross-entropy loss -log softmax_y(Wx + b), evaluated via log-sum-exp.
double softmax_ce(const Eigen::Ref<const Vector>& x, std::uint32_t y,
                  const ClassifierParams& params);

struct CeGradients {
  Matrix d_weights;  // M x D_in
  Vector d_biases;   // M
  Vector d_input;    // D_in, the upstream gradient for the encoder chain
};

CeGradients softmax_ce_backward(const Eigen::Ref<const Vector>& x, std::uint32_t y,
                                const ClassifierParams& params);

struct FitOptions {
  double lr = 1e-2;
  int epochs = 100;
  int batch = 1;
  std::uint64_t seed = 0;
  double min_improvement = 1e-7;
};

/// Minibatch SGD on the cross-entropy loss from zero-initialized parameters.
/// Returns after the epoch budget, or earlier once the epoch-mean loss
/// improvement drops below min_improvement. epochs = 0 returns the zero
/// parameters untouched.
ClassifierParams fit_classifier(const Matrix& design, const std::vector<std::uint32_t>& labels,
                                Eigen::Index num_classes, const FitOptions& opts);

/// Same optimization, continuing from the given starting parameters.
ClassifierParams fit_classifier_warm(ClassifierParams start, const Matrix& design,
                                     const std::vector<std::uint32_t>& labels,
                                     const FitOptions& opts);

}  // namespace lfa
