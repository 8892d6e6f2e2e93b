// Parallel kernels against their serial reference twins. Sizes follow the
// selector's shapes: pool x paired-texts similarity, paired x paired for
// thresholds.
#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "hnal/kernels.hpp"

namespace k = hnal::kernels;
namespace r = hnal::kernels::reference;
using hnal::Matrix;

namespace {

Matrix random(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (double& v : m.data) v = n(rng);
  return m;
}

template <auto Fn>
void BM_cosine(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Matrix a = random(n, 32, 1), b = random(n, 32, 2), out(n, n);
  auto na = k::row_norms(a), nb = k::row_norms(b);
  for (auto _ : st) {
    Fn(a, na, b, nb, out);
    benchmark::DoNotOptimize(out.data.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n * n));
}

template <auto Fn>
void BM_project(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Matrix x = random(n, 64, 3), w = random(64, 32, 4), out(n, 32);
  for (auto _ : st) {
    Fn(x, w, out);
    benchmark::DoNotOptimize(out.data.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n));
}

template <auto Fn>
void BM_kth_largest(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Matrix sim = random(n, n, 5);
  std::vector<std::size_t> own(n);
  std::iota(own.begin(), own.end(), 0);
  std::vector<double> out(n);
  std::vector<std::uint8_t> valid(n);
  for (auto _ : st) {
    Fn(sim, own, 5, out, valid);
    benchmark::DoNotOptimize(out.data());
  }
}

template <auto Fn>
void BM_scores(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Matrix sim = random(n, n, 6);
  std::vector<double> xi(n, 1.0), out(n);
  for (auto _ : st) {
    Fn(sim, xi, true, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <auto Fn>
void BM_nearest(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Matrix pts = random(n, 32, 7), cents = random(300, 32, 8);
  std::vector<std::size_t> assign(n);
  for (auto _ : st) {
    Fn(pts, cents, assign);
    benchmark::DoNotOptimize(assign.data());
  }
}

template <auto Fn>
void BM_ranks(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Matrix sim = random(n, n, 9);
  std::vector<std::size_t> truth(n), order(n), rank(n);
  std::iota(truth.begin(), truth.end(), 0);
  std::iota(order.begin(), order.end(), 0);
  for (auto _ : st) {
    Fn(sim, truth, order, rank);
    benchmark::DoNotOptimize(rank.data());
  }
}

}  // namespace

BENCHMARK(BM_cosine<k::cosine_matrix>)->Name("cosine_matrix/parallel")->Arg(256)->Arg(1024);
BENCHMARK(BM_cosine<r::cosine_matrix>)->Name("cosine_matrix/reference")->Arg(256)->Arg(1024);
BENCHMARK(BM_project<k::project_rows>)->Name("project_rows/parallel")->Arg(2000);
BENCHMARK(BM_project<r::project_rows>)->Name("project_rows/reference")->Arg(2000);
BENCHMARK(BM_kth_largest<k::kth_largest_columns>)->Name("kth_largest/parallel")->Arg(600);
BENCHMARK(BM_kth_largest<r::kth_largest_columns>)->Name("kth_largest/reference")->Arg(600);
BENCHMARK(BM_scores<k::hard_negative_scores>)->Name("hardneg_scores/parallel")->Arg(1200);
BENCHMARK(BM_scores<r::hard_negative_scores>)->Name("hardneg_scores/reference")->Arg(1200);
BENCHMARK(BM_nearest<k::nearest_centroids>)->Name("nearest_centroids/parallel")->Arg(5000);
BENCHMARK(BM_nearest<r::nearest_centroids>)->Name("nearest_centroids/reference")->Arg(5000);
BENCHMARK(BM_ranks<k::match_ranks>)->Name("match_ranks/parallel")->Arg(500);
BENCHMARK(BM_ranks<r::match_ranks>)->Name("match_ranks/reference")->Arg(500);

BENCHMARK_MAIN();
