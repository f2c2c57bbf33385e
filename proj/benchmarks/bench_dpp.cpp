#include <benchmark/benchmark.h>

#include "groundal/dpp.hpp"
#include "groundal/random.hpp"

using namespace groundal;

namespace {

Eigen::MatrixXd points(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = standard_normal(rng);
  return X;
}

// Kernel construction, eigendecomposition included.
void BM_RbfKernel(benchmark::State& state) {
  const Eigen::MatrixXd X = points(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(rbf_kernel(X, 4.0));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_RbfKernel)->RangeMultiplier(2)->Range(64, 512)->Complexity();

// Sampling only; the kernel is decomposed once outside the loop.
void BM_SampleKDpp(benchmark::State& state) {
  const DppKernel K = rbf_kernel(points(static_cast<std::size_t>(state.range(0)), 2), 4.0);
  const auto k = static_cast<std::size_t>(state.range(1));
  Rng rng = make_rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(sample_k_dpp(K, k, rng));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SampleKDpp)->ArgsProduct({{100, 200, 400, 800, 1600}, {5}})->Complexity(benchmark::oN);
BENCHMARK(BM_SampleKDpp)->ArgsProduct({{400}, {2, 5, 10, 20}});

void BM_ElementarySymmetric(benchmark::State& state) {
  Rng rng = make_rng(4);
  std::vector<double> lambda(static_cast<std::size_t>(state.range(0)));
  for (double& l : lambda) l = uniform01(rng);
  for (auto _ : state) benchmark::DoNotOptimize(elementary_symmetric(lambda, 10));
}
BENCHMARK(BM_ElementarySymmetric)->Range(64, 4096);

void BM_ModulatedKernel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DppKernel K = rbf_kernel(points(n, 5), 4.0);
  Rng rng = make_rng(6);
  Eigen::VectorXd logp(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < logp.size(); ++i) logp[i] = standard_normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(gmm_modulated_kernel(K, logp));
}
BENCHMARK(BM_ModulatedKernel)->Range(64, 512);

}  // namespace

BENCHMARK_MAIN();
