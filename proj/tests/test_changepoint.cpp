#include <doctest.h>

#include <map>
#include <random>
#include <sstream>

#include "hmcd/changepoint.hpp"
#include "hmcd/errors.hpp"
#include "support/oracles.hpp"

using namespace hmcd;

namespace {

InteractionSequence seq_of(std::vector<ItemIndex> items) { return {"u", std::move(items)}; }

ItemFactors one_dim(std::vector<double> values) {
  ItemFactors f{Matrix(values.size(), 1)};
  for (std::size_t i = 0; i < values.size(); ++i) f.factors(i, 0) = values[i];
  return f;
}

std::vector<std::size_t> lengths(const std::vector<InteractionSequence>& segs) {
  std::vector<std::size_t> out;
  for (const auto& s : segs) out.push_back(s.items.size());
  return out;
}

}  // namespace

TEST_CASE("hmcd on the toy model finds the single state switch") {
  const auto toy = oracle::toy_model();
  DetectionConfig c;
  const auto cps = hmcd_detect(toy, seq_of({0, 0, 2, 2}), c);
  CHECK(cps.indices == std::vector<std::size_t>{2});
  CHECK(cps.scores == std::vector<double>{1.0});

  c.score_mode = ScoreMode::raw;
  c.tau = 0.0;
  const auto raw = hmcd_detect(toy, seq_of({0, 0, 2, 2}), c);
  REQUIRE(raw.size() == 1);
  CHECK(raw.scores[0] == doctest::Approx(0.1 * 0.9));
}

TEST_CASE("hmcd trivial cases") {
  HmmParams one;
  one.num_states = 1;
  one.num_items = 3;
  one.pi = {1.0};
  one.trans = Matrix(1, 1, 1.0);
  one.emis = Matrix(1, 3, 1.0 / 3);
  DetectionConfig c;
  c.tau = 0.0;
  CHECK(hmcd_detect(one, seq_of({0, 1, 2, 0}), c).empty());

  std::mt19937_64 rng(2);
  c.score_mode = ScoreMode::raw;
  c.tau = 1.0;
  for (int k = 0; k < 20; ++k) {
    const auto m = oracle::random_model(rng, 3, 4);
    std::vector<ItemIndex> y(12);
    for (auto& v : y) v = static_cast<ItemIndex>(rng() % 4);
    CHECK(hmcd_detect(m, seq_of(y), c).empty());
  }
  CHECK_THROWS_AS(hmcd_detect(one, seq_of({}), c), EmptyInputError);
}

TEST_CASE("hmcd threshold properties") {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 30; ++k) {
    const auto m = oracle::random_model(rng, 3, 4);
    std::vector<ItemIndex> y(15);
    for (auto& v : y) v = static_cast<ItemIndex>(rng() % 4);
    const auto path = viterbi_decode(m, seq_of(y)).path;
    std::vector<std::size_t> switches;
    for (std::size_t t = 1; t < path.size(); ++t)
      if (path[t] != path[t - 1]) switches.push_back(t);

    DetectionConfig c;
    c.tau = 0.0;
    const auto all = hmcd_detect(m, seq_of(y), c);
    CHECK(all.indices == switches);
    if (!all.empty()) CHECK(*std::max_element(all.scores.begin(), all.scores.end()) == 1.0);

    std::vector<std::size_t> prev = all.indices;
    for (double tau : {0.2, 0.5, 0.8, 0.99}) {
      c.tau = tau;
      const auto cur = hmcd_detect(m, seq_of(y), c).indices;
      CHECK(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
      prev = cur;
    }

    c.tau = 0.0;
    c.max_changes = 1;
    const auto capped = hmcd_detect(m, seq_of(y), c);
    CHECK(capped.size() == std::min<std::size_t>(1, switches.size()));
  }
}

TEST_CASE("segment splits at change points") {
  const auto s6 = seq_of({0, 1, 2, 3, 4, 5});
  CHECK(lengths(segment(s6, {{4}, {1.0}})) == std::vector<std::size_t>{4, 2});
  const auto whole = segment(s6, {});
  REQUIRE(whole.size() == 1);
  CHECK(whole[0].items == s6.items);
  CHECK(lengths(segment(seq_of({0, 1, 2, 3, 4}), {{1, 3}, {1.0, 1.0}})) == std::vector<std::size_t>{1, 2, 2});
  CHECK_THROWS_AS(segment(s6, {{6}, {1.0}}), InvalidChangePointError);
  CHECK_THROWS_AS(segment(s6, {{0}, {1.0}}), InvalidChangePointError);
  CHECK_THROWS_AS(segment(s6, {{3, 2}, {1.0, 1.0}}), InvalidChangePointError);

  std::vector<ItemIndex> joined;
  for (const auto& part : segment(s6, {{2, 3, 5}, {1, 1, 1}}))
    joined.insert(joined.end(), part.items.begin(), part.items.end());
  CHECK(joined == s6.items);
}

TEST_CASE("cusum examples") {
  const auto f = one_dim({0.0, 1.0});
  CHECK(cusum_detect(f, seq_of({0, 0, 1, 1}), 0.5).indices == std::vector<std::size_t>{2});
  CHECK(cusum_detect(f, seq_of({0, 0, 0}), 0.1).empty());
  const auto g = one_dim({0.0, 3.0});
  CHECK(cusum_detect(g, seq_of({0, 1, 0, 1}), 5.0).indices == std::vector<std::size_t>{2});
  CHECK(cusum_total(g, seq_of({0, 1, 0, 1})) == doctest::Approx(9.0));
  CHECK_THROWS_AS(cusum_detect(f, seq_of({0}), 0.5), EmptyInputError);
  CHECK_THROWS_AS(cusum_detect(f, seq_of({0, 4}), 0.5), VocabularyError);

  // appending after the first exceedance does not move it
  const auto base = cusum_detect(g, seq_of({0, 1, 0, 1}), 5.0);
  CHECK(cusum_detect(g, seq_of({0, 1, 0, 1, 1, 0, 0}), 5.0) == base);
}

TEST_CASE("sliding window matches brute-force objective") {
  const auto f = one_dim({0.0, 10.0});
  CHECK(sliding_window_detect(f, seq_of({0, 0, 1, 1})).indices == std::vector<std::size_t>{2});

  const auto pair = sliding_window_detect(f, seq_of({1, 1}));
  CHECK(pair.indices == std::vector<std::size_t>{1});
  CHECK(pair.scores[0] == doctest::Approx(0.0));

  const auto mirrored = seq_of({0, 1, 1, 0});
  const auto obj = sliding_window_objective(f, mirrored);
  std::vector<std::vector<double>> pts{{0.0}, {10.0}, {10.0}, {0.0}};
  for (std::size_t t = 1; t < 4; ++t) CHECK(obj[t - 1] == doctest::Approx(oracle::window_objective(pts, t)));
  CHECK(oracle::window_objective(pts, 1) == doctest::Approx(oracle::window_objective(pts, 3)));
  const auto cps = sliding_window_detect(f, mirrored);
  const std::size_t best = oracle::window_objective(pts, 2) > oracle::window_objective(pts, 1) ? 2 : 1;
  CHECK(cps.indices == std::vector<std::size_t>{best});

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    ItemFactors g{Matrix(6, 3)};
    for (auto& v : g.factors.values()) v = u(rng);
    std::vector<ItemIndex> y(2 + rng() % 12);
    for (auto& v : y) v = static_cast<ItemIndex>(rng() % 6);
    std::vector<std::vector<double>> p;
    for (auto i : y) p.emplace_back(g.factors.row(i).begin(), g.factors.row(i).end());
    const auto values = sliding_window_objective(g, seq_of(y));
    double best_v = -1e300;
    std::size_t best_t = 0;
    for (std::size_t t = 1; t < y.size(); ++t) {
      const double o = oracle::window_objective(p, t);
      CHECK(values[t - 1] == doctest::Approx(o).epsilon(1e-9));
      if (o > best_v + 1e-9 * std::max(1.0, std::abs(best_v))) {
        best_v = o;
        best_t = t;
      }
    }
    CHECK(sliding_window_detect(g, seq_of(y)).indices == std::vector<std::size_t>{best_t});
  }
  CHECK_THROWS_AS(sliding_window_detect(f, seq_of({0})), EmptyInputError);
}

TEST_CASE("random partition") {
  CHECK(random_partition(seq_of({0, 1}), 77).indices == std::vector<std::size_t>{1});
  const auto s = seq_of(std::vector<ItemIndex>(100, 0));
  CHECK(random_partition(s, 5) == random_partition(s, 5));
  std::map<std::size_t, int> freq;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto cps = random_partition(s, seed);
    REQUIRE(cps.size() == 1);
    ++freq[cps.indices[0]];
  }
  CHECK(freq.size() == 99);
  CHECK(freq.begin()->first == 1);
  CHECK(freq.rbegin()->first == 99);
  const double expected = 10000.0 / 99.0;
  for (const auto& [idx, n] : freq) {
    CHECK(n < 5.0 * expected);
    CHECK(n > expected / 5.0);
  }
  CHECK_THROWS_AS(random_partition(seq_of({0}), 1), EmptyInputError);
}

TEST_CASE("score mode names and change-point table") {
  CHECK(parse_score_mode("raw") == ScoreMode::raw);
  CHECK(parse_score_mode("candidate-max") == ScoreMode::candidate_max);
  CHECK(to_string(ScoreMode::candidate_max) == "candidate-max");
  CHECK_THROWS_AS(parse_score_mode("max"), ConfigError);

  ChangePointSet cps{{3, 7}, {0.5, 1.0}};
  CHECK(cps.strongest() == 7u);
  CHECK(ChangePointSet{{2, 4}, {1.0, 1.0}}.strongest() == 2u);
  CHECK_FALSE(ChangePointSet{}.strongest());
  std::ostringstream out;
  write_change_points(out, "u1", cps, true);
  CHECK(out.str() == "user_id,index,score\nu1,3,0.5\nu1,7,1\n");
}
