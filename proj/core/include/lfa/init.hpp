#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lfa/types.hpp"

namespace lfa {

/// Features pooled across training bags for clustering. provenance[i] is
/// the (bag id, row) the i-th pooled feature came from.
struct PooledFeatures {
  Matrix rows;  // N_pool x D
  std::vector<std::pair<std::string, Eigen::Index>> provenance;

  Eigen::Index size() const { return rows.rows(); }
  Eigen::Index dim() const { return rows.cols(); }
};

/// Uniform random subset of all features across bags, at most cap rows,
/// original order preserved. Deterministic under seed.
PooledFeatures pool_features(const std::vector<FeatureBag>& bags, Eigen::Index cap,
                             std::uint64_t seed);

struct KMeansOptions {
  int max_iters = 100;
  double tol = 1e-8;  // stop when the inertia improvement drops below this
};

struct KMeansResult {
  Matrix centers;                       // K x D
  std::vector<Eigen::Index> assignments;
  std::vector<double> inertia_history;  // one entry per Lloyd iteration, non-increasing

  double inertia() const { return inertia_history.back(); }
};

/// Lloyd iterations from k-means++ seeding. Empty clusters are repaired by
/// moving the center onto the point farthest from its current center.
KMeansResult kmeans(const PooledFeatures& pool, Eigen::Index k, const KMeansOptions& opts,
                    std::uint64_t seed);

struct GmmOptions {
  int max_iters = 100;
  double tol = 1e-7;  // stop when the log-likelihood improvement drops below this
  // Per-dimension variance floor = scale * pooled variance of that dimension.
  double variance_floor_scale = 1e-6;
};

/// Diagonal-covariance Gaussian mixture fitted with EM.
struct GmmModel {
  Matrix means;      // K x D
  Matrix variances;  // K x D, strictly positive
  Vector weights;    // K, on the simplex
  std::vector<double> log_likelihood_history;  // one entry per EM iteration
  bool variance_floored = false;  // true when the floor clamped any variance
};

/// EM with diagonal covariances, initialized from a k-means run on the same
/// pool. Log-likelihood is non-decreasing per iteration (up to the variance
/// floor on degenerate data, which sets variance_floored).
GmmModel gmm(const PooledFeatures& pool, Eigen::Index k, const GmmOptions& opts,
             std::uint64_t seed);

enum class InitMode { Random, KMeans, Gmm };

const char* to_string(InitMode mode);
InitMode init_mode_from_string(std::string_view name);

struct InitConfig {
  InitMode mode = InitMode::KMeans;
  EncoderKind kind = EncoderKind::T1;
  Eigen::Index k = 2;
  double gamma = 1.0;
  Eigen::Index pool_cap = 200000;
  std::uint64_t seed = 0;
  KMeansOptions kmeans;
  GmmOptions gmm;
};

/// Builds the starting aggregator parameters:
///   random -> codebook = K sampled features, identity covariance
///   kmeans -> codebook = cluster centers,   identity covariance
///   gmm    -> codebook = mixture means, log-precisions = -log(variances)
/// Bow parameter sets always get identity covariance.
AggregatorParams init_params(const std::vector<FeatureBag>& bags, const InitConfig& config);

}  // namespace lfa
