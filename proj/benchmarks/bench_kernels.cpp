// Throughput comparison of the serial reference kernels against their OpenMP
// counterparts. Run with --benchmark_filter=... to pick a kernel.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "mop/kernels.hpp"
#include "mop/matrix.hpp"
#include "mop/rng.hpp"

using namespace mop;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform01() * 2.0 - 1.0;
  return m;
}

struct KmeansInputs {
  Matrix points;
  Matrix centers;
  std::vector<std::size_t> labels;
  std::vector<double> dist2;

  KmeansInputs(std::size_t n, std::size_t k, std::size_t dim)
      : points(random_matrix(n, dim, 1)), centers(random_matrix(k, dim, 2)) {
    kernels::serial::nearest_center(points, centers, labels, dist2);
  }
};

struct VladInputs {
  Matrix patches;
  Matrix centers;
  std::vector<Assignment> flat;
  std::vector<std::size_t> offsets;

  VladInputs(std::size_t n, std::size_t k, std::size_t dim, std::size_t r)
      : patches(random_matrix(n, dim, 3)), centers(random_matrix(k, dim, 4)) {
    SplitMix64 rng(5);
    offsets.push_back(0);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t a = 0; a < r; ++a)
        flat.push_back({rng.uniform_index(k), 1.0 / static_cast<double>(r)});
      offsets.push_back(flat.size());
    }
  }
};

template <bool Parallel>
void bm_nearest_center(benchmark::State& state) {
  KmeansInputs in(static_cast<std::size_t>(state.range(0)), 64, 128);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::nearest_center(in.points, in.centers, in.labels, in.dist2);
    else
      kernels::serial::nearest_center(in.points, in.centers, in.labels, in.dist2);
    benchmark::DoNotOptimize(in.dist2.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void bm_cluster_means(benchmark::State& state) {
  KmeansInputs in(static_cast<std::size_t>(state.range(0)), 64, 128);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::cluster_means(in.points, in.labels, 64, in.centers);
    else
      kernels::serial::cluster_means(in.points, in.labels, 64, in.centers);
    benchmark::DoNotOptimize(in.centers.data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void bm_project_rows(benchmark::State& state) {
  Matrix rows = random_matrix(static_cast<std::size_t>(state.range(0)), 256, 6);
  Matrix components = random_matrix(64, 256, 7);
  std::vector<double> mean(256, 0.25);
  Matrix out;
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::project_rows(rows, mean, components, {}, out);
    else
      kernels::serial::project_rows(rows, mean, components, {}, out);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void bm_pairwise_sqdist(benchmark::State& state) {
  Matrix queries = random_matrix(static_cast<std::size_t>(state.range(0)), 128, 8);
  Matrix db = random_matrix(512, 128, 9);
  Matrix out;
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::pairwise_sqdist(queries, db, out);
    else
      kernels::serial::pairwise_sqdist(queries, db, out);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void bm_vlad_accumulate(benchmark::State& state) {
  VladInputs in(static_cast<std::size_t>(state.range(0)), 64, 128, 5);
  std::vector<double> out;
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::vlad_accumulate(in.patches, in.centers, in.flat, in.offsets, out);
    else
      kernels::serial::vlad_accumulate(in.patches, in.centers, in.flat, in.offsets, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(bm_nearest_center<false>)->Name("nearest_center/serial")->Arg(1024)->Arg(8192);
BENCHMARK(bm_nearest_center<true>)->Name("nearest_center/omp")->Arg(1024)->Arg(8192);
BENCHMARK(bm_cluster_means<false>)->Name("cluster_means/serial")->Arg(1024)->Arg(8192);
BENCHMARK(bm_cluster_means<true>)->Name("cluster_means/omp")->Arg(1024)->Arg(8192);
BENCHMARK(bm_project_rows<false>)->Name("project_rows/serial")->Arg(256)->Arg(2048);
BENCHMARK(bm_project_rows<true>)->Name("project_rows/omp")->Arg(256)->Arg(2048);
BENCHMARK(bm_pairwise_sqdist<false>)->Name("pairwise_sqdist/serial")->Arg(64)->Arg(512);
BENCHMARK(bm_pairwise_sqdist<true>)->Name("pairwise_sqdist/omp")->Arg(64)->Arg(512);
BENCHMARK(bm_vlad_accumulate<false>)->Name("vlad_accumulate/serial")->Arg(512)->Arg(4096);
BENCHMARK(bm_vlad_accumulate<true>)->Name("vlad_accumulate/omp")->Arg(512)->Arg(4096);

BENCHMARK_MAIN();
