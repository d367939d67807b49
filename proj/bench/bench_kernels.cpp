// Serial reference vs OpenMP kernels. Both variants produce bit-identical output.

#include <benchmark/benchmark.h>

#include <random>

#include "hmcd/data.hpp"
#include "hmcd/factorization.hpp"
#include "hmcd/hmm.hpp"

namespace {

using namespace hmcd;

std::vector<InteractionSequence> corpus(std::size_t n) {
  const std::vector<std::size_t> lengths(n, 120);
  return planted_hmm_pool(2, 200, lengths, 1).sequences;
}

SparseMatrix binary_matrix(std::size_t rows, std::size_t cols, double density) {
  std::mt19937_64 rng(2);
  std::bernoulli_distribution coin(density);
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = coin(rng) ? 1.0 : 0.0;
  return SparseMatrix::from_dense(m);
}

template <bool Parallel>
void BM_EStep(benchmark::State& state) {
  const auto seqs = corpus(static_cast<std::size_t>(state.range(0)));
  const auto model = random_hmm(static_cast<std::size_t>(state.range(1)), 200, 3);
  for (auto _ : state) {
    auto counts = Parallel ? kernels::expected_counts_omp(model, seqs) : kernels::expected_counts_serial(model, seqs);
    benchmark::DoNotOptimize(counts.log_likelihood);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_NmfIteration(benchmark::State& state) {
  const auto m = binary_matrix(static_cast<std::size_t>(state.range(0)), 500, 0.05);
  const auto mt = m.transposed();
  const auto rank = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Matrix p(m.rows, rank), q(m.cols, rank);
  for (auto& v : p.values()) v = u(rng);
  for (auto& v : q.values()) v = u(rng);
  for (auto _ : state) {
    const double loss = Parallel ? kernels::nmf_iteration_omp(m, mt, p, q, 10)
                                 : kernels::nmf_iteration_serial(m, mt, p, q, 10);
    benchmark::DoNotOptimize(loss);
  }
}

}  // namespace

BENCHMARK(BM_EStep<false>)->Name("estep/serial")->Args({500, 2})->Args({500, 5});
BENCHMARK(BM_EStep<true>)->Name("estep/omp")->Args({500, 2})->Args({500, 5});
BENCHMARK(BM_NmfIteration<false>)->Name("nmf_iteration/serial")->Args({2000, 40});
BENCHMARK(BM_NmfIteration<true>)->Name("nmf_iteration/omp")->Args({2000, 40});

BENCHMARK_MAIN();
