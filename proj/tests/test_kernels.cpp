#include <doctest.h>

#include <random>

#include "hmcd/factorization.hpp"
#include "hmcd/hmm.hpp"
#include "hmcd/parallel.hpp"
#include "support/oracles.hpp"

using namespace hmcd;

namespace {

std::vector<InteractionSequence> random_corpus(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::vector<InteractionSequence> out;
  for (std::size_t k = 0; k < n; ++k) {
    InteractionSequence s{"u" + std::to_string(k), std::vector<ItemIndex>(rng() % 40)};
    for (auto& v : s.items) v = static_cast<ItemIndex>(rng() % m);
    out.push_back(std::move(s));
  }
  return out;
}

struct ThreadGuard {
  int saved = worker_threads();
  ~ThreadGuard() { set_worker_threads(saved); }
};

}  // namespace

TEST_CASE("parallel e-step is bit-identical to the serial one") {
  ThreadGuard guard;
  std::mt19937_64 rng(1);
  for (int threads : {1, 2, 4}) {
    set_worker_threads(threads);
    const auto model = oracle::random_model(rng, 3, 7);
    const auto corpus = random_corpus(rng, 57, 7);
    const auto s = kernels::expected_counts_serial(model, corpus);
    const auto p = kernels::expected_counts_omp(model, corpus);
    CHECK(s.initial == p.initial);
    CHECK(s.transitions == p.transitions);
    CHECK(s.emissions == p.emissions);
    CHECK(s.log_likelihood == p.log_likelihood);
  }
}

TEST_CASE("parallel nmf iteration is bit-identical to the serial one") {
  ThreadGuard guard;
  std::mt19937_64 rng(2);
  std::bernoulli_distribution coin(0.2);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int threads : {1, 3}) {
    set_worker_threads(threads);
    Matrix dense(37, 23);
    for (auto& v : dense.values()) v = coin(rng) ? 1.0 : 0.0;
    const auto m = SparseMatrix::from_dense(dense);
    const auto mt = m.transposed();
    Matrix p(37, 5), q(23, 5);
    for (auto& v : p.values()) v = u(rng);
    for (auto& v : q.values()) v = u(rng);
    Matrix p2 = p, q2 = q;
    for (int it = 0; it < 5; ++it) {
      const double a = kernels::nmf_iteration_serial(m, mt, p, q, it + 1);
      const double b = kernels::nmf_iteration_omp(m, mt, p2, q2, it + 1);
      CHECK(a == b);
    }
    CHECK(p == p2);
    CHECK(q == q2);
  }
}

TEST_CASE("e-step log-likelihood matches the forward pass") {
  std::mt19937_64 rng(3);
  const auto model = oracle::random_model(rng, 2, 4);
  const auto corpus = random_corpus(rng, 10, 4);
  double total = 0.0;
  for (const auto& s : corpus) total += forward_log_likelihood(model, s);
  CHECK(kernels::expected_counts_serial(model, corpus).log_likelihood == doctest::Approx(total).epsilon(1e-12));
}
