#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "hmcd/errors.hpp"
#include "hmcd/hmm.hpp"
#include "support/oracles.hpp"

using namespace hmcd;

namespace {

InteractionSequence seq_of(std::vector<ItemIndex> items) { return {"u", std::move(items)}; }

HmmParams single_state(std::vector<double> emis) {
  HmmParams p;
  p.num_states = 1;
  p.num_items = emis.size();
  p.pi = {1.0};
  p.trans = Matrix(1, 1, 1.0);
  p.emis = Matrix(1, emis.size());
  std::copy(emis.begin(), emis.end(), p.emis.row(0).begin());
  return p;
}

std::vector<InteractionSequence> sample_corpus(const HmmParams& m, std::size_t n, std::size_t T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<InteractionSequence> out;
  auto draw = [&](std::span<const double> row) {
    std::discrete_distribution<std::size_t> d(row.begin(), row.end());
    return d(rng);
  };
  for (std::size_t k = 0; k < n; ++k) {
    InteractionSequence s{"u" + std::to_string(k), {}};
    std::size_t z = draw(m.pi);
    for (std::size_t t = 0; t < T; ++t) {
      if (t > 0) z = draw(m.trans.row(z));
      s.items.push_back(static_cast<ItemIndex>(draw(m.emis.row(z))));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("forward likelihood of a single state is the emission product") {
  const auto m = single_state({0.5, 0.5});
  CHECK(forward_log_likelihood(m, seq_of({0, 1, 0})) == doctest::Approx(std::log(0.125)).epsilon(1e-12));
}

TEST_CASE("forward likelihood of the toy model matches path enumeration") {
  const auto m = oracle::toy_model();
  const std::vector<ItemIndex> y{0, 2};
  const double expected = oracle::likelihood(m, y);
  CHECK(expected == doctest::Approx(0.081).epsilon(1e-12));
  CHECK(forward_log_likelihood(m, seq_of(y)) == doctest::Approx(std::log(expected)).epsilon(1e-12));
}

TEST_CASE("forward likelihood edge cases") {
  const auto m = oracle::toy_model();
  CHECK(forward_log_likelihood(m, seq_of({})) == 0.0);
  CHECK(std::isinf(forward_log_likelihood(m, seq_of({2, 0}))));
  CHECK_THROWS_AS(forward_log_likelihood(m, seq_of({3})), VocabularyError);
}

TEST_CASE("forward likelihood stays finite on long sequences") {
  std::mt19937_64 rng(3);
  const auto m = oracle::random_model(rng, 3, 5);
  const auto corpus = sample_corpus(m, 1, 10000, 4);
  const double ll = forward_log_likelihood(m, corpus[0]);
  CHECK(std::isfinite(ll));
  CHECK(ll < 0.0);
}

TEST_CASE("forward and viterbi agree with exhaustive enumeration on random models") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t h = 1 + rng() % 3, m = 1 + rng() % 4, T = 1 + rng() % 6;
    const auto model = oracle::random_model(rng, h, m);
    std::vector<ItemIndex> y(T);
    for (auto& v : y) v = static_cast<ItemIndex>(rng() % m);
    const double brute = oracle::likelihood(model, y);
    CHECK(forward_log_likelihood(model, seq_of(y)) == doctest::Approx(std::log(brute)).epsilon(1e-9));
    const auto best = oracle::best_path(model, y);
    const auto vit = viterbi_decode(model, seq_of(y));
    CHECK(vit.path == best.path);
    CHECK(std::exp(vit.log_prob) == doctest::Approx(best.probability).epsilon(1e-9));
  }
}

TEST_CASE("viterbi examples") {
  const auto toy = oracle::toy_model();
  const auto r = viterbi_decode(toy, seq_of({0, 0, 2, 2}));
  CHECK(r.path == std::vector<std::size_t>{0, 0, 1, 1});
  CHECK(r.path == oracle::best_path(toy, std::vector<ItemIndex>{0, 0, 2, 2}).path);
  REQUIRE(r.step_scores.size() == 4);
  CHECK(r.step_scores[0] == doctest::Approx(0.9));
  CHECK(r.step_scores[2] == doctest::Approx(0.1 * 0.9));
  double sum = 0.0;
  for (double s : r.step_scores) sum += std::log(s);
  CHECK(r.log_prob == doctest::Approx(sum));

  const auto one = single_state({0.2, 0.3, 0.5});
  CHECK(viterbi_decode(one, seq_of({2, 1, 0, 2})).path == std::vector<std::size_t>(4, 0));

  HmmParams det;
  det.num_states = 2;
  det.num_items = 2;
  det.pi = {0.5, 0.5};
  det.trans = Matrix(2, 2, 0.5);
  det.emis = Matrix(2, 2);
  det.emis(0, 0) = 1.0;
  det.emis(1, 1) = 1.0;
  CHECK(viterbi_decode(det, seq_of({0})).path == std::vector<std::size_t>{0});
}

TEST_CASE("viterbi ties go to the lowest state and zero-probability input is survivable") {
  HmmParams flat;
  flat.num_states = 3;
  flat.num_items = 2;
  flat.pi = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  flat.trans = Matrix(3, 3, 1.0 / 3);
  flat.emis = Matrix(3, 2, 0.5);
  CHECK(viterbi_decode(flat, seq_of({0, 1, 1})).path == std::vector<std::size_t>{0, 0, 0});

  const auto toy = oracle::toy_model();
  const auto r = viterbi_decode(toy, seq_of({2, 0}));
  CHECK(r.path == std::vector<std::size_t>{0, 0});
  CHECK(std::isinf(r.log_prob));
  CHECK(r.log_prob < 0.0);
  CHECK_THROWS_AS(viterbi_decode(toy, seq_of({})), EmptyInputError);
  CHECK_THROWS_AS(viterbi_decode(toy, seq_of({7})), VocabularyError);
}

TEST_CASE("baum-welch with one state recovers empirical frequencies") {
  const std::vector<InteractionSequence> corpus{seq_of({0, 0, 1}), seq_of({0})};
  FitConfig c;
  c.smoothing = 0.0;
  const auto m = baum_welch_fit(corpus, 1, 2, c);
  CHECK(m.emis(0, 0) == doctest::Approx(0.75));
  CHECK(m.emis(0, 1) == doctest::Approx(0.25));
  CHECK(m.trans(0, 0) == doctest::Approx(1.0));
  CHECK(m.pi[0] == doctest::Approx(1.0));
}

TEST_CASE("baum-welch is deterministic and keeps stochastic rows") {
  std::mt19937_64 rng(5);
  const auto truth = oracle::random_model(rng, 2, 4);
  const auto corpus = sample_corpus(truth, 20, 30, 6);
  FitConfig c;
  c.seed = 99;
  c.max_iters = 20;
  const auto a = baum_welch_fit(corpus, 3, 4, c);
  const auto b = baum_welch_fit(corpus, 3, 4, c);
  CHECK(a == b);
  CHECK(a.seed == 99);
  CHECK_NOTHROW(validate(a));
  for (double v : a.emis.values()) CHECK(v > 0.0);
  c.execution = Execution::serial;
  CHECK(baum_welch_fit(corpus, 3, 4, c) == a);
}

TEST_CASE("baum-welch log-likelihood improves on data from the toy model") {
  const auto corpus = sample_corpus(oracle::toy_model(), 50, 100, 21);
  FitConfig c;
  c.seed = 1;
  c.max_iters = 10;
  c.ll_tolerance = 0.0;
  const auto fit = fit_hmm(corpus, 2, 3, c);
  REQUIRE(fit.log_likelihood.size() >= 10);
  CHECK(fit.log_likelihood[9] >= fit.log_likelihood[0]);
  for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
    CHECK(fit.log_likelihood[i] >= fit.log_likelihood[i - 1] - 1e-8);
  }
}

TEST_CASE("baum-welch argument errors") {
  FitConfig c;
  const std::vector<InteractionSequence> empty{seq_of({}), seq_of({})};
  CHECK_THROWS_AS(baum_welch_fit(empty, 2, 3, c), EmptyInputError);
  const std::vector<InteractionSequence> one{seq_of({0})};
  CHECK_THROWS_AS(baum_welch_fit(one, 0, 3, c), InvalidParameterError);
  CHECK_THROWS_AS(baum_welch_fit(one, 2, 0, c), InvalidParameterError);
}

TEST_CASE("model text format round-trips bit-exactly") {
  FitConfig c;
  c.seed = 123456789012345ULL;
  c.max_iters = 5;
  std::mt19937_64 rng(8);
  const auto corpus = sample_corpus(oracle::random_model(rng, 2, 5), 10, 20, 9);
  const auto m = baum_welch_fit(corpus, 2, 5, c);
  std::stringstream first;
  save_hmm(m, first);
  const auto loaded = load_hmm(first);
  CHECK(loaded == m);
  std::stringstream second;
  save_hmm(loaded, second);
  CHECK(second.str() == first.str());

  std::istringstream broken("hmcd-hmm 1\nnum_states 2\nnum_items 2\nseed 0\npi\n0.5 0.6\n");
  CHECK_THROWS_AS(load_hmm(broken), ParseError);
}
