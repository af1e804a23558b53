#include <benchmark/benchmark.h>

#include "lfa/classifier.hpp"
#include "lfa/encoder.hpp"
#include "lfa/gradients.hpp"
#include "lfa/init.hpp"
#include "lfa/rng.hpp"

namespace {

lfa::AggregatorParams make_params(Eigen::Index k, Eigen::Index d, lfa::EncoderKind kind) {
  lfa::Rng rng(7);
  lfa::AggregatorParams params;
  params.kind = kind;
  params.gamma = 1.0;
  params.codebook.centers.resize(k, d);
  params.precisions.log_precisions.resize(k, d);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      params.codebook.centers(r, c) = rng.uniform(-1.0, 1.0);
      params.precisions.log_precisions(r, c) = rng.uniform(-0.3, 0.3);
    }
  }
  return params;
}

lfa::FeatureBag make_bag(Eigen::Index n, Eigen::Index d) {
  lfa::Rng rng(11);
  lfa::FeatureBag bag;
  bag.id = "bench";
  bag.descriptors.resize(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      bag.descriptors(r, c) = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
  }
  return bag;
}

void aggregate_t1(benchmark::State& state) {
  const auto k = state.range(0);
  const auto params = make_params(k, 64, lfa::EncoderKind::T1);
  const auto bag = make_bag(256, 64);
  for (auto _ : state) {
    lfa::Vector rep = lfa::aggregate(bag, params);
    benchmark::DoNotOptimize(rep.data());
  }
  state.SetItemsProcessed(state.iterations() * bag.size());
}
BENCHMARK(aggregate_t1)->Arg(16)->Arg(64)->Arg(256);

void aggregate_t2(benchmark::State& state) {
  const auto k = state.range(0);
  const auto params = make_params(k, 64, lfa::EncoderKind::T2);
  const auto bag = make_bag(256, 64);
  for (auto _ : state) {
    lfa::Vector rep = lfa::aggregate(bag, params);
    benchmark::DoNotOptimize(rep.data());
  }
  state.SetItemsProcessed(state.iterations() * bag.size());
}
BENCHMARK(aggregate_t2)->Arg(16)->Arg(64);

void backward_aggregate_t1(benchmark::State& state) {
  const auto k = state.range(0);
  const auto params = make_params(k, 64, lfa::EncoderKind::T1);
  const auto bag = make_bag(256, 64);
  lfa::Rng rng(3);
  lfa::Vector upstream(k);
  for (Eigen::Index i = 0; i < k; ++i) upstream(i) = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    lfa::ParamGradients grads = lfa::backward_aggregate(bag, params, upstream);
    benchmark::DoNotOptimize(grads.d_codebook.data());
  }
  state.SetItemsProcessed(state.iterations() * bag.size());
}
BENCHMARK(backward_aggregate_t1)->Arg(16)->Arg(64)->Arg(256);

void chi2_map_wide(benchmark::State& state) {
  const auto n = state.range(0);
  lfa::Rng rng(5);
  lfa::Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.uniform();
  x /= x.sum();
  const lfa::FeatureMapConfig cfg;
  for (auto _ : state) {
    lfa::Vector mapped = lfa::chi2_map(x, cfg);
    benchmark::DoNotOptimize(mapped.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(chi2_map_wide)->Arg(256)->Arg(1024);

void kmeans_pool(benchmark::State& state) {
  const auto n = state.range(0);
  lfa::Rng rng(9);
  lfa::PooledFeatures pool;
  pool.rows.resize(n, 16);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < 16; ++c) pool.rows(r, c) = rng.normal();
  }
  for (auto _ : state) {
    lfa::KMeansResult result = lfa::kmeans(pool, 32, lfa::KMeansOptions{}, 42);
    benchmark::DoNotOptimize(result.centers.data());
  }
}
BENCHMARK(kmeans_pool)->Arg(2048)->Arg(8192)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
