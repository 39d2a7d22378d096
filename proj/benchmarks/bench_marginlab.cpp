#include <benchmark/benchmark.h>

#include <Eigen/Core>
#include <cstdint>
#include <random>

#include "marginlab/constructions.hpp"
#include "marginlab/embedding.hpp"
#include "marginlab/reduce.hpp"
#include "marginlab/relevance.hpp"
#include "marginlab/train.hpp"

using namespace marginlab;

namespace {

void BM_colex_unrank(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int k = static_cast<int>(state.range(1));
  const std::int64_t N = binomial(n, k);
  std::int64_t j = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(colex_unrank(j, n, k));
    j = (j + 1) % N;
  }
}
BENCHMARK(BM_colex_unrank)->Args({30, 2})->Args({32, 4})->Args({64, 8});

void BM_colex_walk(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int k = static_cast<int>(state.range(1));
  const std::int64_t N = binomial(n, k);
  for (auto _ : state) {
    std::vector<int> s = colex_unrank(0, n, k);
    for (std::int64_t j = 1; j < N; ++j) colex_next(s, n);
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations() * N);
}
BENCHMARK(BM_colex_walk)->Args({30, 2})->Args({32, 4});

void BM_certify_simplex(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int k = static_cast<int>(state.range(1));
  const EmbeddingPair E = simplex_baseline(RelevanceMatrix::snk(n, k));
  for (auto _ : state) benchmark::DoNotOptimize(certify(E));
  state.SetItemsProcessed(state.iterations() * E.matrix().rows() * n);
}
BENCHMARK(BM_certify_simplex)->Args({12, 2})->Args({30, 2})->Args({32, 4});

void BM_khatri_rao_build(benchmark::State& state) {
  const RelevanceMatrix A = RelevanceMatrix::snk(12, 2);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto [E, params] = khatri_rao(A, 11, seed++, 20);
    benchmark::DoNotOptimize(E.doc_vectors());
  }
}
BENCHMARK(BM_khatri_rao_build);

void BM_min_norm_point(benchmark::State& state) {
  const int pts = static_cast<int>(state.range(0));
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd W(16, pts);
  for (int i = 0; i < pts; ++i) {
    for (int r = 0; r < 16; ++r) W(r, i) = nd(gen);
    W.col(i) = W.col(i).normalized() + Eigen::VectorXd::Constant(16, 0.1);
  }
  for (auto _ : state) benchmark::DoNotOptimize(min_norm_point(W));
}
BENCHMARK(BM_min_norm_point)->Arg(8)->Arg(32)->Arg(128);

void BM_sigmoid_loss(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const RelevanceMatrix A = RelevanceMatrix::snk(n, 2);
  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd U(A.rows(), 8), V(n, 8);
  for (int r = 0; r < U.rows(); ++r)
    for (int c = 0; c < 8; ++c) U(r, c) = nd(gen);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < 8; ++c) V(r, c) = nd(gen);
  U.rowwise().normalize();
  V.rowwise().normalize();
  for (auto _ : state)
    benchmark::DoNotOptimize(sigmoid_loss(A, U, V, 10.0, 0.0, true));
  state.SetItemsProcessed(state.iterations() * A.rows() * n);
}
BENCHMARK(BM_sigmoid_loss)->Arg(20)->Arg(40);

void BM_jl_project(benchmark::State& state) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd X(64, 256);
  for (int c = 0; c < 256; ++c)
    for (int r = 0; r < 64; ++r) X(r, c) = nd(gen);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(jl_project(X, 20, seed++));
}
BENCHMARK(BM_jl_project);

}  // namespace

BENCHMARK_MAIN();
