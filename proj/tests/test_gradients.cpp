#include <cmath>

#include <doctest.h>

#include "lfa/encoder.hpp"
#include "lfa/gradients.hpp"
#include "lfa/rng.hpp"
#include "test_util.hpp"

using namespace lfa;

namespace {

// Finite-difference oracle for d<upstream, encode(f)>/d(slot), independent of
// the analytic backward pass.
double fd_encode(const Vector& f, AggregatorParams& params, const Vector& upstream,
                 double& slot, double step = 1e-6) {
  const double saved = slot;
  slot = saved + step;
  const double hi = upstream.dot(encode(f, params));
  slot = saved - step;
  const double lo = upstream.dot(encode(f, params));
  slot = saved;
  return (hi - lo) / (2.0 * step);
}

double fd_aggregate(const FeatureBag& bag, AggregatorParams& params, const Vector& upstream,
                    double& slot, double step = 1e-6) {
  const double saved = slot;
  slot = saved + step;
  const double hi = upstream.dot(aggregate(bag, params));
  slot = saved - step;
  const double lo = upstream.dot(aggregate(bag, params));
  slot = saved;
  return (hi - lo) / (2.0 * step);
}

// Guarded denominator: below 1e-4 the check degrades to scaled absolute
// error, keeping finite-difference noise on near-zero components out of the
// comparison.
double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-4});
}

}  // namespace

TEST_CASE("backward_encode basics") {
  Matrix centers(2, 1);
  centers << 0.0, 1.0;

  SUBCASE("zero upstream gives zero gradients") {
    auto params = test::make_params(EncoderKind::T1, centers, 1.0);
    Vector f(1);
    f << 0.3;
    auto grads = backward_encode(f, params, Vector::Zero(2));
    CHECK(grads.d_codebook.isZero(0.0));
    CHECK(grads.d_log_precisions.isZero(0.0));
  }

  SUBCASE("K=1 T1 output is constant, gradient vanishes") {
    Matrix one(1, 2);
    one << 0.5, -0.5;
    auto params = test::make_params(EncoderKind::T1, one, 2.0);
    Vector f(2);
    f << 1.0, 1.0;
    auto grads = backward_encode(f, params, Vector::Constant(1, 3.0));
    CHECK(grads.d_codebook.cwiseAbs().maxCoeff() < 1e-14);
    CHECK(grads.d_log_precisions.cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("constant upstream annihilated by the softmax Jacobian") {
    Rng rng(11);
    auto params = test::random_params(rng, EncoderKind::T1, 3, 2, 1.5);
    Vector f(2);
    f << 0.1, -0.2;
    auto grads = backward_encode(f, params, Vector::Ones(3));
    CHECK(grads.d_codebook.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(grads.d_log_precisions.cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("spec instance against central finite differences") {
    auto params = test::make_params(EncoderKind::T1, centers, 1.0);
    Vector f(1);
    f << 0.0;
    Vector upstream(2);
    upstream << 1.0, 0.0;
    auto grads = backward_encode(f, params, upstream);
    for (Eigen::Index k = 0; k < 2; ++k) {
      const double numeric = fd_encode(f, params, upstream, params.codebook.centers(k, 0));
      CHECK(rel_err(grads.d_codebook(k, 0), numeric) < 1e-6);
    }
  }

  SUBCASE("upstream length mismatch is rejected") {
    auto params = test::make_params(EncoderKind::T1, centers, 1.0);
    Vector f(1);
    f << 0.0;
    CHECK_THROWS_AS(backward_encode(f, params, Vector::Zero(3)), ContractError);
  }
}

TEST_CASE("analytic gradients match finite differences on random instances") {
  Rng rng(77);
  for (EncoderKind kind : {EncoderKind::T1, EncoderKind::T2, EncoderKind::Bow}) {
    for (int trial = 0; trial < 60; ++trial) {
      const auto d = static_cast<Eigen::Index>(1 + rng.uniform_int(5));
      const auto k = static_cast<Eigen::Index>(1 + rng.uniform_int(4));
      const auto n = static_cast<Eigen::Index>(1 + rng.uniform_int(6));
      auto params = test::random_params(rng, kind, k, d, rng.uniform(0.3, 2.0));
      auto bag = test::random_bag(rng, "g", 0, n, d);
      Vector upstream(params.output_dim());
      for (Eigen::Index i = 0; i < upstream.size(); ++i) upstream(i) = rng.uniform(-1.0, 1.0);

      const ParamGradients grads = backward_aggregate(bag, params, upstream);
      double worst = 0.0;
      for (Eigen::Index r = 0; r < k; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) {
          const double numeric =
              fd_aggregate(bag, params, upstream, params.codebook.centers(r, c));
          worst = std::max(worst, rel_err(grads.d_codebook(r, c), numeric));
          if (kind != EncoderKind::Bow) {
            const double numeric_p =
                fd_aggregate(bag, params, upstream, params.precisions.log_precisions(r, c));
            worst = std::max(worst, rel_err(grads.d_log_precisions(r, c), numeric_p));
          }
        }
      }
      CHECK(worst < 1e-5);
    }
  }
}

TEST_CASE("backward_aggregate subsampling") {
  Rng rng(99);
  auto params = test::random_params(rng, EncoderKind::T1, 3, 2, 1.0);
  auto bag = test::random_bag(rng, "s", 0, 6, 2);
  Vector upstream(3);
  upstream << 0.7, -0.3, 0.1;

  SUBCASE("single-feature bag equals backward_encode") {
    auto one = test::random_bag(rng, "one", 0, 1, 2);
    const Vector f = one.descriptors.row(0).cast<double>().transpose();
    const ParamGradients a = backward_aggregate(one, params, upstream);
    const ParamGradients b = backward_encode(f, params, upstream);
    CHECK((a.d_codebook - b.d_codebook).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.d_log_precisions - b.d_log_precisions).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("full-sized sample without replacement is bitwise equal to full") {
    const ParamGradients full = backward_aggregate(bag, params, upstream);
    SubsampleSpec spec;
    spec.sample_size = bag.size();
    spec.seed = 123;
    const ParamGradients sampled = backward_aggregate(bag, params, upstream, spec);
    CHECK((full.d_codebook - sampled.d_codebook).cwiseAbs().maxCoeff() == 0.0);
    CHECK((full.d_log_precisions - sampled.d_log_precisions).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("estimator is unbiased over seeded half-bag subsamples") {
    // A tight feature cluster keeps the per-feature gradient terms aligned;
    // the Monte-Carlo mean over 10k draws then resolves the 1% bound with
    // two orders of magnitude to spare on every component above 1e-6.
    Matrix cluster(6, 2);
    for (Eigen::Index r = 0; r < 6; ++r) {
      cluster(r, 0) = 0.3 + rng.uniform(-1e-3, 1e-3);
      cluster(r, 1) = -0.2 + rng.uniform(-1e-3, 1e-3);
    }
    bag = test::make_bag("cluster", 0, cluster);
    const ParamGradients full = backward_aggregate(bag, params, upstream);
    ParamGradients mean = ParamGradients::zero(3, 2);
    const int runs = 10000;
    for (int i = 0; i < runs; ++i) {
      SubsampleSpec spec;
      spec.sample_size = bag.size() / 2;
      spec.seed = static_cast<std::uint64_t>(i);
      const ParamGradients g = backward_aggregate(bag, params, upstream, spec);
      mean.d_codebook += g.d_codebook;
      mean.d_log_precisions += g.d_log_precisions;
    }
    mean.d_codebook /= runs;
    mean.d_log_precisions /= runs;
    for (Eigen::Index r = 0; r < 3; ++r) {
      for (Eigen::Index c = 0; c < 2; ++c) {
        if (std::fabs(full.d_codebook(r, c)) > 1e-6) {
          CHECK(std::fabs(mean.d_codebook(r, c) - full.d_codebook(r, c)) /
                    std::fabs(full.d_codebook(r, c)) <
                0.01);
        }
        if (std::fabs(full.d_log_precisions(r, c)) > 1e-6) {
          CHECK(std::fabs(mean.d_log_precisions(r, c) - full.d_log_precisions(r, c)) /
                    std::fabs(full.d_log_precisions(r, c)) <
                0.01);
        }
      }
    }
  }

  SUBCASE("oversized sample without replacement is rejected") {
    SubsampleSpec spec;
    spec.sample_size = bag.size() + 1;
    CHECK_THROWS_AS(backward_aggregate(bag, params, upstream, spec), ContractError);
  }

  SUBCASE("oversized sample with replacement is allowed") {
    SubsampleSpec spec;
    spec.sample_size = bag.size() * 3;
    spec.replacement = true;
    CHECK_NOTHROW(backward_aggregate(bag, params, upstream, spec));
  }

  SUBCASE("empty sample is rejected") {
    SubsampleSpec spec;
    spec.sample_size = 0;
    CHECK_THROWS_AS(backward_aggregate(bag, params, upstream, spec), ContractError);
  }

  SUBCASE("subsample indices are deterministic and sorted") {
    SubsampleSpec spec;
    spec.sample_size = 3;
    spec.seed = 42;
    const auto a = subsample_indices(6, spec);
    const auto b = subsample_indices(6, spec);
    CHECK(a == b);
    CHECK(std::is_sorted(a.begin(), a.end()));
  }
}
