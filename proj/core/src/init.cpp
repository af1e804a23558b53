#include "lfa/init.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "lfa/rng.hpp"

namespace lfa {

const char* to_string(InitMode mode) {
  switch (mode) {
    case InitMode::Random: return "random";
    case InitMode::KMeans: return "kmeans";
    case InitMode::Gmm: return "gmm";
  }
  return "unknown";
}

InitMode init_mode_from_string(std::string_view name) {
  if (name == "random") return InitMode::Random;
  if (name == "kmeans") return InitMode::KMeans;
  if (name == "gmm") return InitMode::Gmm;
  throw ContractError("unknown init mode: " + std::string(name));
}

PooledFeatures pool_features(const std::vector<FeatureBag>& bags, Eigen::Index cap,
                             std::uint64_t seed) {
  if (cap < 1) throw ContractError("pool_features: cap must be at least 1");
  Eigen::Index total = 0;
  Eigen::Index dim = -1;
  for (const FeatureBag& bag : bags) {
    if (dim < 0) dim = bag.dim();
    if (bag.dim() != dim) throw ContractError("pool_features: bags disagree on dimension");
    total += bag.size();
  }
  if (total < 1) throw ContractError("pool_features: no features to pool");

  const Eigen::Index take = std::min(cap, total);
  PooledFeatures pool;
  pool.rows.resize(take, dim);
  pool.provenance.reserve(static_cast<std::size_t>(take));

  // Selection sampling: walk every feature once, keep each with probability
  // (still needed / still available). Uniform subset, original order.
  Rng rng(seed);
  Eigen::Index needed = take;
  Eigen::Index available = total;
  Eigen::Index out = 0;
  for (const FeatureBag& bag : bags) {
    for (Eigen::Index row = 0; row < bag.size(); ++row) {
      if (needed > 0 &&
          rng.uniform() * static_cast<double>(available) < static_cast<double>(needed)) {
        pool.rows.row(out) = bag.descriptors.row(row).cast<double>();
        pool.provenance.emplace_back(bag.id, row);
        ++out;
        --needed;
      }
      --available;
    }
  }
  return pool;
}

namespace {

double squared_distance(const Eigen::Ref<const Matrix>& points, Eigen::Index i,
                        const Matrix& centers, Eigen::Index k) {
  return (points.row(i) - centers.row(k)).squaredNorm();
}

Matrix kmeanspp_seed(const PooledFeatures& pool, Eigen::Index k, Rng& rng) {
  const Eigen::Index n = pool.size();
  Matrix centers(k, pool.dim());
  centers.row(0) = pool.rows.row(static_cast<Eigen::Index>(rng.uniform_int(n)));
  Vector d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = squared_distance(pool.rows, i, centers, 0);
  for (Eigen::Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick;
    if (total <= 0.0) {
      pick = static_cast<Eigen::Index>(rng.uniform_int(n));
    } else {
      double r = rng.uniform() * total;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        r -= d2(i);
        if (r <= 0.0) {
          pick = i;
          break;
        }
      }
    }
    centers.row(c) = pool.rows.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2(i) = std::min(d2(i), squared_distance(pool.rows, i, centers, c));
    }
  }
  return centers;
}

// Nearest center per point, ties toward the lowest index. Returns inertia.
double assign_points(const PooledFeatures& pool, const Matrix& centers,
                     std::vector<Eigen::Index>& assignments) {
  const Eigen::Index n = pool.size();
  const Eigen::Index k = centers.rows();
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index best_k = 0;
    for (Eigen::Index c = 0; c < k; ++c) {
      const double d = squared_distance(pool.rows, i, centers, c);
      if (d < best) {
        best = d;
        best_k = c;
      }
    }
    assignments[static_cast<std::size_t>(i)] = best_k;
    inertia += best;
  }
  return inertia;
}

// Moves each empty cluster's center onto the point farthest from its current
// center, which strictly reduces inertia. Returns the repaired inertia.
double repair_empty_clusters(const PooledFeatures& pool, Matrix& centers,
                             std::vector<Eigen::Index>& assignments, double inertia) {
  const Eigen::Index k = centers.rows();
  const Eigen::Index n = pool.size();
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index a : assignments) ++counts[static_cast<std::size_t>(a)];
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) continue;
    double worst = -1.0;
    Eigen::Index worst_i = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index a = assignments[static_cast<std::size_t>(i)];
      if (counts[static_cast<std::size_t>(a)] < 2) continue;  // keep donors nonempty
      const double d = squared_distance(pool.rows, i, centers, a);
      if (d > worst) {
        worst = d;
        worst_i = i;
      }
    }
    if (worst_i < 0) continue;  // fewer distinct points than clusters
    const Eigen::Index old = assignments[static_cast<std::size_t>(worst_i)];
    --counts[static_cast<std::size_t>(old)];
    centers.row(c) = pool.rows.row(worst_i);
    assignments[static_cast<std::size_t>(worst_i)] = c;
    ++counts[static_cast<std::size_t>(c)];
    inertia -= worst;  // the moved point now sits exactly on its center
  }
  return inertia;
}

void update_centers(const PooledFeatures& pool, const std::vector<Eigen::Index>& assignments,
                    Matrix& centers) {
  const Eigen::Index k = centers.rows();
  Matrix sums = Matrix::Zero(k, pool.dim());
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < pool.size(); ++i) {
    const Eigen::Index a = assignments[static_cast<std::size_t>(i)];
    sums.row(a) += pool.rows.row(i);
    ++counts[static_cast<std::size_t>(a)];
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) {
      centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
  }
}

}  // namespace

KMeansResult kmeans(const PooledFeatures& pool, Eigen::Index k, const KMeansOptions& opts,
                    std::uint64_t seed) {
  if (k < 1) throw ContractError("kmeans: k must be at least 1");
  if (pool.size() < k) {
    throw ContractError("kmeans: pool has " + std::to_string(pool.size()) +
                        " features, fewer than k = " + std::to_string(k));
  }
  Rng rng(seed);
  KMeansResult result;
  result.centers = kmeanspp_seed(pool, k, rng);
  result.assignments.resize(static_cast<std::size_t>(pool.size()));

  double inertia = assign_points(pool, result.centers, result.assignments);
  inertia = repair_empty_clusters(pool, result.centers, result.assignments, inertia);
  result.inertia_history.push_back(inertia);

  for (int iter = 1; iter < opts.max_iters; ++iter) {
    update_centers(pool, result.assignments, result.centers);
    double next = assign_points(pool, result.centers, result.assignments);
    next = repair_empty_clusters(pool, result.centers, result.assignments, next);
    if (next > inertia) break;  // converged to floating-point noise
    result.inertia_history.push_back(next);
    const double improvement = inertia - next;
    inertia = next;
    if (improvement < opts.tol) break;
  }
  return result;
}

GmmModel gmm(const PooledFeatures& pool, Eigen::Index k, const GmmOptions& opts,
             std::uint64_t seed) {
  if (k < 1) throw ContractError("gmm: k must be at least 1");
  if (pool.size() < k) throw ContractError("gmm: pool has fewer features than components");
  const Eigen::Index n = pool.size();
  const Eigen::Index d = pool.dim();

  // Per-dimension floor from the pooled variance, with a tiny absolute
  // backstop for constant dimensions.
  const Matrix centered = pool.rows.rowwise() - pool.rows.colwise().mean();
  Vector pooled_var =
      (centered.array().square().colwise().sum() / static_cast<double>(n)).matrix().transpose();
  Vector floor_vec = (pooled_var * opts.variance_floor_scale).cwiseMax(1e-12);

  GmmModel model;
  const KMeansResult km = kmeans(pool, k, KMeansOptions{}, derive_seed(seed, "gmm.kmeans"));
  model.means = km.centers;
  model.variances = Matrix::Zero(k, d);
  model.weights = Vector::Zero(k);
  {
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index a = km.assignments[static_cast<std::size_t>(i)];
      ++counts[static_cast<std::size_t>(a)];
      model.variances.row(a) +=
          (pool.rows.row(i) - model.means.row(a)).array().square().matrix();
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      const double cnt = static_cast<double>(counts[static_cast<std::size_t>(c)]);
      model.weights(c) = cnt / static_cast<double>(n);
      if (cnt > 0) model.variances.row(c) /= cnt;
    }
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (model.variances(c, j) < floor_vec(j)) {
        model.variances(c, j) = floor_vec(j);
        model.variance_floored = true;
      }
    }
  }

  constexpr double kLog2Pi = 1.8378770664093454836;
  Matrix resp(n, k);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    // E step in log space.
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector logp(k);
      for (Eigen::Index c = 0; c < k; ++c) {
        const auto diff = pool.rows.row(i) - model.means.row(c);
        const auto var = model.variances.row(c).array();
        const double quad = (diff.array().square() / var).sum();
        const double logdet = var.log().sum();
        logp(c) = std::log(model.weights(c)) - 0.5 * (d * kLog2Pi + logdet + quad);
      }
      const double top = logp.maxCoeff();
      const double lse = top + std::log((logp.array() - top).exp().sum());
      resp.row(i) = (logp.array() - lse).exp();
      ll += lse;
    }
    if (iter > 0 && ll < prev_ll) break;  // floor or fp noise; keep history monotone
    model.log_likelihood_history.push_back(ll);
    if (iter > 0 && ll - prev_ll < opts.tol) break;
    prev_ll = ll;

    // M step.
    const Vector nk = resp.colwise().sum().transpose();
    for (Eigen::Index c = 0; c < k; ++c) {
      const double mass = nk(c);
      model.weights(c) = mass / static_cast<double>(n);
      if (mass <= 0.0) continue;
      model.means.row(c) = (resp.col(c).transpose() * pool.rows) / mass;
      Matrix sq = pool.rows.rowwise() - model.means.row(c);
      model.variances.row(c) =
          (resp.col(c).transpose() * sq.array().square().matrix()) / mass;
      for (Eigen::Index j = 0; j < d; ++j) {
        if (model.variances(c, j) < floor_vec(j)) {
          model.variances(c, j) = floor_vec(j);
          model.variance_floored = true;
        }
      }
    }
  }
  return model;
}

AggregatorParams init_params(const std::vector<FeatureBag>& bags, const InitConfig& config) {
  if (config.k < 1) throw ContractError("init_params: k must be at least 1");
  const PooledFeatures pool =
      pool_features(bags, config.pool_cap, derive_seed(config.seed, "init.pool"));
  if (pool.size() < config.k) {
    throw ContractError("init_params: " + std::to_string(pool.size()) +
                        " pooled features, fewer than k = " + std::to_string(config.k));
  }

  AggregatorParams params;
  params.kind = config.kind;
  params.gamma = config.gamma;

  switch (config.mode) {
    case InitMode::Random: {
      Rng rng(derive_seed(config.seed, "init.random"));
      std::vector<Eigen::Index> all(static_cast<std::size_t>(pool.size()));
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Eigen::Index>(i);
      params.codebook.centers.resize(config.k, pool.dim());
      for (Eigen::Index i = 0; i < config.k; ++i) {
        const auto j = i + static_cast<Eigen::Index>(rng.uniform_int(pool.size() - i));
        std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
        params.codebook.centers.row(i) = pool.rows.row(all[static_cast<std::size_t>(i)]);
      }
      params.precisions.log_precisions = Matrix::Zero(config.k, pool.dim());
      break;
    }
    case InitMode::KMeans: {
      const KMeansResult km =
          kmeans(pool, config.k, config.kmeans, derive_seed(config.seed, "init.kmeans"));
      params.codebook.centers = km.centers;
      params.precisions.log_precisions = Matrix::Zero(config.k, pool.dim());
      break;
    }
    case InitMode::Gmm: {
      const GmmModel model =
          gmm(pool, config.k, config.gmm, derive_seed(config.seed, "init.gmm"));
      params.codebook.centers = model.means;
      params.precisions.log_precisions = -model.variances.array().log();
      break;
    }
  }

  // Bow is defined with identity covariance regardless of the init mode.
  if (config.kind == EncoderKind::Bow) {
    params.precisions.log_precisions.setZero();
  }
  params.validate();
  return params;
}

}  // namespace lfa
