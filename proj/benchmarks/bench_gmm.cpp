#include <benchmark/benchmark.h>

#include "groundal/gmm.hpp"
#include "groundal/random.hpp"

using namespace groundal;

namespace {

Eigen::MatrixXd blobs(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double shift = 4.0 * static_cast<double>(uniform_index(rng, 5));
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = shift + standard_normal(rng);
  }
  return X;
}

void BM_KMeansInit(benchmark::State& state) {
  const Eigen::MatrixXd X = blobs(static_cast<std::size_t>(state.range(0)), 8, 1);
  for (auto _ : state) benchmark::DoNotOptimize(kmeans_init(X, 15, 2));
}
BENCHMARK(BM_KMeansInit)->Range(128, 2048);

void BM_FitDiagonal(benchmark::State& state) {
  const Eigen::MatrixXd X = blobs(static_cast<std::size_t>(state.range(0)), 8, 3);
  for (auto _ : state) benchmark::DoNotOptimize(fit_gmm(X, 15, 4));
}
BENCHMARK(BM_FitDiagonal)->Range(128, 2048)->Unit(benchmark::kMillisecond);

void BM_FitFull(benchmark::State& state) {
  const Eigen::MatrixXd X = blobs(static_cast<std::size_t>(state.range(0)), 8, 5);
  GmmOptions opts;
  opts.covariance = CovarianceType::Full;
  for (auto _ : state) benchmark::DoNotOptimize(fit_gmm(X, 15, 6, opts));
}
BENCHMARK(BM_FitFull)->Range(128, 1024)->Unit(benchmark::kMillisecond);

void BM_ComponentLogDensities(benchmark::State& state) {
  const Eigen::MatrixXd X = blobs(static_cast<std::size_t>(state.range(0)), 8, 7);
  const GmmModel m = fit_gmm(X, 15, 8).first;
  for (auto _ : state) benchmark::DoNotOptimize(component_log_densities(m, X));
}
BENCHMARK(BM_ComponentLogDensities)->Range(128, 4096);

}  // namespace

BENCHMARK_MAIN();
