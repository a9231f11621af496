// Microbenchmarks for the pieces that dominate experiment wall time: raw
// stream draws, cloud sampling, the kernel Gram, its Cholesky solve, the
// eigensolver, and a full fitting trial.

#include <benchmark/benchmark.h>

#include "ellipfit/fitter.hpp"
#include "ellipfit/linalg.hpp"
#include "ellipfit/point_cloud.hpp"
#include "ellipfit/random.hpp"
#include "ellipfit/sym_matrix.hpp"

using namespace ellip;

namespace {

void bm_stream_u64(benchmark::State& state) {
  RandomStream s(1, 0);
  for (auto _ : state) benchmark::DoNotOptimize(s.next_u64());
}
BENCHMARK(bm_stream_u64);

void bm_stream_normal(benchmark::State& state) {
  RandomStream s(1, 0);
  for (auto _ : state) benchmark::DoNotOptimize(s.normal());
}
BENCHMARK(bm_stream_normal);

void bm_sample_cloud(benchmark::State& state) {
  const Eigen::Index d = state.range(0);
  const Eigen::Index n = d * d / 10;
  RandomStream s(1, 0);
  for (auto _ : state) {
    PointCloud cloud = sample_gaussian_cloud(d, n, s);
    benchmark::DoNotOptimize(cloud.norms_sq.sum());
  }
}
BENCHMARK(bm_sample_cloud)->Arg(30)->Arg(60)->Arg(100);

void bm_kernel_gram(benchmark::State& state) {
  const Eigen::Index d = state.range(0);
  const Eigen::Index n = d * d / 10;
  RandomStream s(1, 0);
  PointCloud cloud = sample_gaussian_cloud(d, n, s);
  for (auto _ : state) {
    auto gram = fitter::kernel_gram(cloud);
    benchmark::DoNotOptimize(gram.theta(0, 0));
  }
}
BENCHMARK(bm_kernel_gram)->Arg(30)->Arg(60)->Arg(100);

void bm_spd_solve(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  RandomStream s(1, 0);
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = s.normal();
  SymMatrix a = SymMatrix::mirror_lower(
      g * g.transpose() / double(n) + Eigen::MatrixXd::Identity(n, n));
  Eigen::VectorXd b = s.normal_vector(n);
  for (auto _ : state) benchmark::DoNotOptimize(spd_solve(a, b).sum());
}
BENCHMARK(bm_spd_solve)->Arg(90)->Arg(180)->Arg(360);

void bm_eig_extremes(benchmark::State& state) {
  const Eigen::Index d = state.range(0);
  RandomStream s(1, 0);
  SymMatrix m(d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) m.set(i, j, s.normal());
  for (auto _ : state) benchmark::DoNotOptimize(sym_eig_extremes(m).min);
}
BENCHMARK(bm_eig_extremes)->Arg(30)->Arg(60)->Arg(120);

void bm_fit_trial(benchmark::State& state) {
  const Eigen::Index d = state.range(0);
  const Eigen::Index n = d * d / 10;
  std::int64_t trial = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(fitter::fit_trial(d, n, 1, trial++).success);
}
BENCHMARK(bm_fit_trial)->Arg(30)->Arg(50)->Arg(80);

}  // namespace

BENCHMARK_MAIN();
