#include <algorithm>
#include <cmath>
#include <set>

#include <doctest.h>

#include "lfa/init.hpp"
#include "lfa/rng.hpp"
#include "test_util.hpp"

using namespace lfa;

namespace {

std::vector<FeatureBag> two_bags_of(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  return {test::random_bag(rng, "a", 0, n, d), test::random_bag(rng, "b", 1, n, d)};
}

PooledFeatures pool_of(const Matrix& rows) {
  PooledFeatures pool;
  pool.rows = rows;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) pool.provenance.emplace_back("p", i);
  return pool;
}

// Brute-force k=2 oracle: best 2-partition by exhaustive enumeration.
double best_two_partition_inertia(const Matrix& points, Matrix& best_centers) {
  const Eigen::Index n = points.rows();
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
    Matrix centers = Matrix::Zero(2, points.cols());
    Eigen::Index counts[2] = {0, 0};
    for (Eigen::Index i = 0; i < n; ++i) {
      const int side = (mask >> i) & 1;
      centers.row(side) += points.row(i);
      ++counts[side];
    }
    if (counts[0] == 0 || counts[1] == 0) continue;
    centers.row(0) /= static_cast<double>(counts[0]);
    centers.row(1) /= static_cast<double>(counts[1]);
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int side = (mask >> i) & 1;
      inertia += (points.row(i) - centers.row(side)).squaredNorm();
    }
    if (inertia < best) {
      best = inertia;
      best_centers = centers;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("pool_features") {
  SUBCASE("cap above total keeps everything in original order") {
    auto bags = two_bags_of(4, 2, 1);
    const PooledFeatures pool = pool_features(bags, 100, 7);
    REQUIRE(pool.size() == 8);
    for (Eigen::Index i = 0; i < 4; ++i) {
      CHECK(pool.rows(i, 0) ==
            doctest::Approx(static_cast<double>(bags[0].descriptors(i, 0))));
      CHECK(pool.provenance[static_cast<std::size_t>(i)].first == "a");
    }
  }

  SUBCASE("cap equal to bag size on one bag is forced") {
    Rng rng(3);
    std::vector<FeatureBag> bags = {test::random_bag(rng, "only", 0, 5, 2)};
    const PooledFeatures pool = pool_features(bags, 5, 11);
    REQUIRE(pool.size() == 5);
    for (Eigen::Index i = 0; i < 5; ++i) {
      CHECK(pool.rows(i, 1) ==
            doctest::Approx(static_cast<double>(bags[0].descriptors(i, 1))));
    }
  }

  SUBCASE("sampling is deterministic under a seed") {
    auto bags = two_bags_of(10, 2, 5);
    const PooledFeatures a = pool_features(bags, 5, 7);
    const PooledFeatures b = pool_features(bags, 5, 7);
    REQUIRE(a.size() == 5);
    CHECK((a.rows - b.rows).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.provenance == b.provenance);
  }

  SUBCASE("no features is an error") {
    std::vector<FeatureBag> bags;
    CHECK_THROWS_AS(pool_features(bags, 10, 0), ContractError);
  }
}

TEST_CASE("kmeans") {
  SUBCASE("K equal to pool size puts a center on every point") {
    Matrix points(3, 2);
    points << 0.0, 0.0, 1.0, 0.0, 0.0, 1.0;
    const KMeansResult result = kmeans(pool_of(points), 3, KMeansOptions{}, 4);
    CHECK(result.inertia() == doctest::Approx(0.0));
    // every point is some center
    for (Eigen::Index i = 0; i < 3; ++i) {
      double best = 1e9;
      for (Eigen::Index k = 0; k < 3; ++k) {
        best = std::min(best, (points.row(i) - result.centers.row(k)).squaredNorm());
      }
      CHECK(best == doctest::Approx(0.0));
    }
  }

  SUBCASE("two tight pairs in 1-D against the exhaustive oracle") {
    Matrix points(4, 1);
    points << 0.0, 0.1, 10.0, 10.1;
    Matrix oracle_centers;
    const double oracle = best_two_partition_inertia(points, oracle_centers);
    const KMeansResult result = kmeans(pool_of(points), 2, KMeansOptions{}, 9);
    CHECK(result.inertia() == doctest::Approx(oracle).epsilon(1e-12));
    std::vector<double> got = {result.centers(0, 0), result.centers(1, 0)};
    std::sort(got.begin(), got.end());
    CHECK(got[0] == doctest::Approx(0.05));
    CHECK(got[1] == doctest::Approx(10.05));
  }

  SUBCASE("K = 1 gives the pooled mean") {
    Rng rng(12);
    Matrix points(20, 3);
    for (Eigen::Index r = 0; r < 20; ++r) {
      for (Eigen::Index c = 0; c < 3; ++c) points(r, c) = rng.uniform(-2.0, 2.0);
    }
    const KMeansResult result = kmeans(pool_of(points), 1, KMeansOptions{}, 1);
    const Matrix mean = points.colwise().mean();
    CHECK((result.centers - mean).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("inertia history is non-increasing, result deterministic") {
    Rng rng(31);
    Matrix points(60, 2);
    for (Eigen::Index r = 0; r < 60; ++r) {
      for (Eigen::Index c = 0; c < 2; ++c) points(r, c) = rng.normal();
    }
    const KMeansResult a = kmeans(pool_of(points), 5, KMeansOptions{}, 77);
    for (std::size_t i = 1; i < a.inertia_history.size(); ++i) {
      CHECK(a.inertia_history[i] <= a.inertia_history[i - 1]);
    }
    const KMeansResult b = kmeans(pool_of(points), 5, KMeansOptions{}, 77);
    CHECK((a.centers - b.centers).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("every center owns at least one point after repair") {
    // Duplicated points force empty-cluster repairs.
    Matrix points(6, 1);
    points << 0.0, 0.0, 0.0, 0.0, 5.0, 5.0;
    const KMeansResult result = kmeans(pool_of(points), 3, KMeansOptions{}, 13);
    std::set<Eigen::Index> owners(result.assignments.begin(), result.assignments.end());
    CHECK(owners.size() == 3);
  }

  SUBCASE("K larger than the pool is rejected") {
    Matrix points(2, 1);
    points << 0.0, 1.0;
    CHECK_THROWS_AS(kmeans(pool_of(points), 3, KMeansOptions{}, 0), ContractError);
  }
}

TEST_CASE("gmm") {
  SUBCASE("K = 1 recovers the biased MLE") {
    Rng rng(21);
    Matrix points(50, 2);
    for (Eigen::Index r = 0; r < 50; ++r) {
      points(r, 0) = rng.normal(1.0, 2.0);
      points(r, 1) = rng.normal(-3.0, 0.5);
    }
    const GmmModel model = gmm(pool_of(points), 1, GmmOptions{}, 2);
    const Matrix mean = points.colwise().mean();
    CHECK((model.means - mean).cwiseAbs().maxCoeff() < 1e-9);
    const Matrix centered = points.rowwise() - points.colwise().mean();
    const Matrix var = centered.array().square().colwise().sum().matrix() / 50.0;
    CHECK((model.variances - var).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(model.weights(0) == doctest::Approx(1.0));
  }

  SUBCASE("two well-separated blobs are recovered") {
    Rng rng(22);
    Matrix points(200, 2);
    for (Eigen::Index r = 0; r < 200; ++r) {
      const double cx = r < 100 ? -5.0 : 5.0;
      points(r, 0) = rng.normal(cx, 1.0);
      points(r, 1) = rng.normal(0.0, 1.0);
    }
    const GmmModel model = gmm(pool_of(points), 2, GmmOptions{}, 3);
    std::vector<double> means = {model.means(0, 0), model.means(1, 0)};
    std::sort(means.begin(), means.end());
    CHECK(std::fabs(means[0] - -5.0) < 0.25);
    CHECK(std::fabs(means[1] - 5.0) < 0.25);
    CHECK(model.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(model.weights.minCoeff() >= 0.0);
  }

  SUBCASE("log-likelihood history is non-decreasing") {
    Rng rng(23);
    for (int data_seed = 0; data_seed < 10; ++data_seed) {
      Matrix points(40, 2);
      for (Eigen::Index r = 0; r < 40; ++r) {
        for (Eigen::Index c = 0; c < 2; ++c) points(r, c) = rng.normal(0.0, 1.5);
      }
      const GmmModel model = gmm(pool_of(points), 3, GmmOptions{},
                                 static_cast<std::uint64_t>(data_seed));
      for (std::size_t i = 1; i < model.log_likelihood_history.size(); ++i) {
        CHECK(model.log_likelihood_history[i] >= model.log_likelihood_history[i - 1] - 1e-9);
      }
    }
  }

  SUBCASE("degenerate pool floors the variances and reports it") {
    Matrix points(10, 2);
    points.setConstant(3.0);
    const GmmModel model = gmm(pool_of(points), 2, GmmOptions{}, 5);
    CHECK(model.variance_floored);
    CHECK(model.variances.minCoeff() > 0.0);
  }
}

TEST_CASE("init_params") {
  auto bags = two_bags_of(20, 2, 40);

  SUBCASE("kmeans mode gives exactly zero log-precisions") {
    InitConfig cfg;
    cfg.mode = InitMode::KMeans;
    cfg.k = 3;
    cfg.seed = 1;
    const AggregatorParams params = init_params(bags, cfg);
    CHECK(params.precisions.log_precisions.isZero(0.0));
    CHECK(params.codebook.centers.rows() == 3);
  }

  SUBCASE("gmm mode with unit variances gives zero log-precisions") {
    // Direct check of the mapping, not of the EM output: -log(1) = 0.
    CHECK(std::fabs(-std::log(1.0)) == 0.0);
    InitConfig cfg;
    cfg.mode = InitMode::Gmm;
    cfg.k = 2;
    cfg.seed = 2;
    const AggregatorParams params = init_params(bags, cfg);
    // log-precisions are the negated log variances from the fitted mixture
    const GmmModel model =
        gmm(pool_features(bags, cfg.pool_cap, derive_seed(cfg.seed, "init.pool")), 2,
            cfg.gmm, derive_seed(cfg.seed, "init.gmm"));
    const Matrix expected = -model.variances.array().log();
    CHECK((params.precisions.log_precisions - expected).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("random mode picks verbatim feature rows") {
    InitConfig cfg;
    cfg.mode = InitMode::Random;
    cfg.k = 4;
    cfg.seed = 3;
    const AggregatorParams params = init_params(bags, cfg);
    CHECK(params.precisions.log_precisions.isZero(0.0));
    for (Eigen::Index k = 0; k < 4; ++k) {
      bool found = false;
      for (const FeatureBag& bag : bags) {
        for (Eigen::Index r = 0; r < bag.size(); ++r) {
          if ((bag.descriptors.row(r).cast<double>() - params.codebook.centers.row(k))
                  .cwiseAbs()
                  .maxCoeff() == 0.0) {
            found = true;
          }
        }
      }
      CHECK(found);
    }
  }

  SUBCASE("random mode is deterministic under seed") {
    InitConfig cfg;
    cfg.mode = InitMode::Random;
    cfg.k = 4;
    cfg.seed = 9;
    const AggregatorParams a = init_params(bags, cfg);
    const AggregatorParams b = init_params(bags, cfg);
    CHECK((a.codebook.centers - b.codebook.centers).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("bow kind forces identity covariance even under gmm init") {
    InitConfig cfg;
    cfg.mode = InitMode::Gmm;
    cfg.kind = EncoderKind::Bow;
    cfg.k = 2;
    const AggregatorParams params = init_params(bags, cfg);
    CHECK(params.precisions.log_precisions.isZero(0.0));
  }

  SUBCASE("k larger than the feature count propagates as an error") {
    Rng rng(50);
    std::vector<FeatureBag> tiny = {test::random_bag(rng, "t", 0, 2, 2)};
    InitConfig cfg;
    cfg.k = 5;
    CHECK_THROWS_AS(init_params(tiny, cfg), ContractError);
  }
}
