// Serial reference kernels against their OpenMP counterparts.
// Run with OMP_NUM_THREADS set to the core count you want to compare.

#include <benchmark/benchmark.h>

#include <random>

#include "batchquad/gp.hpp"
#include "batchquad/warped_bq.hpp"

namespace {

using namespace batchquad;

Points random_points(int n, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Points x(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) x(i, j) = u(rng);
  return x;
}

Exec exec_of(const benchmark::State& state) { return state.range(1) == 0 ? Exec::kSerial : Exec::kParallel; }

void BM_Gram(benchmark::State& state) {
  const Points x = random_points(static_cast<int>(state.range(0)), 4, 1);
  const KernelParams k{1.0, 1.5};
  for (auto _ : state) benchmark::DoNotOptimize(kernels::gram(x, k, 1e-8, exec_of(state)));
}

void BM_CrossCovariance(benchmark::State& state) {
  const Points x = random_points(200, 4, 2);
  const Points q = random_points(static_cast<int>(state.range(0)), 4, 3);
  const KernelParams k{1.0, 1.5};
  for (auto _ : state) benchmark::DoNotOptimize(kernels::cross_covariance(x, q, k, exec_of(state)));
}

void BM_PosteriorWithGradients(benchmark::State& state) {
  const Points x = random_points(100, 2, 4);
  const KernelParams k{1.0, 1.0};
  const GpModel m = fit_gp(x, sample_gp_prior(k, x, 5), k);
  const Points q = random_points(static_cast<int>(state.range(0)), 2, 6);
  for (auto _ : state) benchmark::DoNotOptimize(m.posterior_with_gradients(q, exec_of(state)));
}

void BM_Acquisition(benchmark::State& state) {
  const Points x = random_points(100, 2, 7);
  const KernelParams k{1.0, 1.0};
  const Eigen::VectorXd ell = (0.5 * sample_gp_prior(k, x, 8).array()).exp().matrix();
  const WarpedModel m = fit_warped(x, ell, k, 0.8);
  const Points q = random_points(static_cast<int>(state.range(0)), 2, 9);
  for (auto _ : state) benchmark::DoNotOptimize(acquisition(m, q, exec_of(state)));
}

// Second argument: 0 serial, 1 OpenMP.
#define BQ_BENCH(fn) BENCHMARK(fn)->ArgsProduct({{64, 256, 1024}, {0, 1}})->ArgNames({"n", "omp"})

BQ_BENCH(BM_Gram);
BQ_BENCH(BM_CrossCovariance);
BQ_BENCH(BM_PosteriorWithGradients);
BQ_BENCH(BM_Acquisition);

}  // namespace

BENCHMARK_MAIN();
