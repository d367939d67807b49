#include "hmcd/recommenders.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hmcd/errors.hpp"

namespace hmcd {
namespace {

void check_item(ItemIndex i, std::size_t m) {
  if (i >= m) throw VocabularyError("item index " + std::to_string(i) + " outside vocabulary");
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

PopularityModel poprank_fit(std::span<const InteractionSequence> corpus, std::size_t num_items) {
  PopularityModel model;
  model.counts.assign(num_items, 0.0);
  bool any = false;
  for (const auto& seq : corpus) {
    for (const ItemIndex i : seq.items) {
      check_item(i, num_items);
      model.counts[i] += 1.0;
      any = true;
    }
  }
  if (!any) throw EmptyInputError("poprank_fit: empty corpus");
  return model;
}

Recommendation poprank_recommend(const PopularityModel& model, std::size_t l,
                                 std::span<const ItemIndex> exclude) {
  return top_l(model.counts, l, exclude);
}

ItemTransitionModel::ItemTransitionModel(std::vector<std::vector<Successor>> successors,
                                         PopularityModel popularity)
    : successors_(std::move(successors)), popularity_(std::move(popularity)) {
  outgoing_.reserve(successors_.size());
  for (const auto& row : successors_) {
    double s = 0.0;
    for (const auto& e : row) s += e.count;
    outgoing_.push_back(s);
  }
}

double ItemTransitionModel::probability(ItemIndex from, ItemIndex to) const {
  const auto row = successors(from);
  const auto it = std::lower_bound(row.begin(), row.end(), to,
                                   [](const Successor& s, ItemIndex v) { return s.item < v; });
  if (it == row.end() || it->item != to) return 0.0;
  return it->count / outgoing_[from];
}

ItemTransitionModel mc_fit(std::span<const InteractionSequence> corpus, std::size_t num_items) {
  std::vector<std::vector<ItemIndex>> raw(num_items);
  bool any_pair = false;
  for (const auto& seq : corpus) {
    for (std::size_t t = 0; t < seq.size(); ++t) {
      check_item(seq.items[t], num_items);
      if (t > 0) {
        raw[seq.items[t - 1]].push_back(seq.items[t]);
        any_pair = true;
      }
    }
  }
  if (!any_pair) throw EmptyInputError("mc_fit: corpus has no adjacent pair");

  std::vector<std::vector<ItemTransitionModel::Successor>> rows(num_items);
  for (std::size_t from = 0; from < num_items; ++from) {
    auto& r = raw[from];
    std::sort(r.begin(), r.end());
    for (std::size_t k = 0; k < r.size();) {
      std::size_t e = k;
      while (e < r.size() && r[e] == r[k]) ++e;
      rows[from].push_back({r[k], static_cast<double>(e - k)});
      k = e;
    }
  }
  return ItemTransitionModel(std::move(rows), poprank_fit(corpus, num_items));
}

Recommendation mc_recommend(const ItemTransitionModel& model, ItemIndex last_item, std::size_t l,
                            std::span<const ItemIndex> exclude) {
  const std::size_t m = model.num_items();
  // Successor probabilities dominate; popularity only orders the backfill.
  std::vector<double> primary(m, 0.0);
  if (last_item < m && !model.empty_row(last_item)) {
    for (const auto& s : model.successors(last_item)) {
      primary[s.item] = s.count / model.outgoing(last_item);
    }
  }
  const auto& pop = model.popularity().counts;
  std::vector<ItemIndex> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = static_cast<ItemIndex>(i);
  std::vector<char> banned(m, 0);
  for (const ItemIndex i : exclude) {
    if (i < m) banned[i] = 1;
  }
  std::erase_if(order, [&](ItemIndex i) { return banned[i] != 0; });
  const std::size_t n = std::min(l, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](ItemIndex a, ItemIndex b) {
                      if (primary[a] != primary[b]) return primary[a] > primary[b];
                      if (pop[a] != pop[b]) return pop[a] > pop[b];
                      return a < b;
                    });
  Recommendation r;
  r.items.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  for (const ItemIndex i : r.items) r.scores.push_back(primary[i]);
  return r;
}

double bpr_triple_loss(std::span<const double> u, std::span<const double> i,
                       std::span<const double> j, double reg) {
  double x = 0.0;
  double norms = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    x += u[k] * (i[k] - j[k]);
    norms += u[k] * u[k] + i[k] * i[k] + j[k] * j[k];
  }
  // -ln sigmoid(x) = ln(1 + e^{-x}), evaluated stably.
  const double nll = x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
  return nll + 0.5 * reg * norms;
}

void bpr_triple_gradient(std::span<const double> u, std::span<const double> i,
                         std::span<const double> j, double reg, std::span<double> grad_u,
                         std::span<double> grad_i, std::span<double> grad_j) {
  double x = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) x += u[k] * (i[k] - j[k]);
  const double g = sigmoid(-x);  // d/dx of -ln sigmoid(x) is -g
  for (std::size_t k = 0; k < u.size(); ++k) {
    grad_u[k] = -g * (i[k] - j[k]) + reg * u[k];
    grad_i[k] = -g * u[k] + reg * i[k];
    grad_j[k] = g * u[k] + reg * j[k];
  }
}

BprModel bpr_fit(std::span<const std::vector<ItemIndex>> user_items, std::size_t num_items,
                 const BprConfig& config) {
  if (config.factors < 1 || config.epochs < 0) throw InvalidParameterError("bpr_fit: invalid config");
  BprModel model;
  model.learning_rate = config.learning_rate;
  model.regularization = config.regularization;
  model.seed = config.seed;
  model.user_factors = Matrix(user_items.size(), config.factors);
  model.item_factors = Matrix(num_items, config.factors);

  std::mt19937_64 gen(config.seed);
  std::normal_distribution<double> normal(0.0, config.init_stddev);
  for (double& v : model.user_factors.values()) v = normal(gen);
  for (double& v : model.item_factors.values()) v = normal(gen);

  std::vector<std::vector<ItemIndex>> positives(user_items.size());
  std::vector<std::size_t> eligible;
  std::size_t total_positives = 0;
  for (std::size_t u = 0; u < user_items.size(); ++u) {
    auto& pos = positives[u];
    pos = user_items[u];
    for (const ItemIndex i : pos) check_item(i, num_items);
    std::sort(pos.begin(), pos.end());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
    if (pos.empty() || pos.size() >= num_items) {
      model.skipped_users.push_back(u);
    } else {
      eligible.push_back(u);
      total_positives += pos.size();
    }
  }
  if (eligible.empty()) return model;

  const std::size_t f = config.factors;
  std::vector<double> gu(f), gi(f), gj(f);
  std::uniform_int_distribution<std::size_t> pick_user(0, eligible.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_item(0, num_items - 1);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t step = 0; step < total_positives; ++step) {
      const std::size_t u = eligible[pick_user(gen)];
      const auto& pos = positives[u];
      const ItemIndex i = pos[std::uniform_int_distribution<std::size_t>(0, pos.size() - 1)(gen)];
      ItemIndex j;
      do {
        j = static_cast<ItemIndex>(pick_item(gen));
      } while (std::binary_search(pos.begin(), pos.end(), j));

      auto uf = model.user_factors.row(u);
      auto fi = model.item_factors.row(i);
      auto fj = model.item_factors.row(j);
      bpr_triple_gradient(uf, fi, fj, config.regularization, gu, gi, gj);
      for (std::size_t k = 0; k < f; ++k) {
        uf[k] -= config.learning_rate * gu[k];
        fi[k] -= config.learning_rate * gi[k];
        fj[k] -= config.learning_rate * gj[k];
      }
    }
  }
  return model;
}

double bpr_mean_loss(const BprModel& model, std::span<const std::vector<ItemIndex>> user_items) {
  double total = 0.0;
  std::size_t n = 0;
  const std::size_t m = model.item_factors.rows();
  for (std::size_t u = 0; u < user_items.size(); ++u) {
    std::vector<char> pos(m, 0);
    for (const ItemIndex i : user_items[u]) pos[i] = 1;
    for (std::size_t i = 0; i < m; ++i) {
      if (!pos[i]) continue;
      for (std::size_t j = 0; j < m; ++j) {
        if (pos[j]) continue;
        total += bpr_triple_loss(model.user_factors.row(u), model.item_factors.row(i),
                                 model.item_factors.row(j), 0.0);
        ++n;
      }
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

Recommendation bpr_recommend(const BprModel& model, std::size_t user, std::size_t l,
                             std::span<const ItemIndex> exclude) {
  if (user >= model.user_factors.rows()) throw InvalidParameterError("bpr_recommend: unknown user");
  std::vector<double> scores(model.item_factors.rows());
  for (std::size_t j = 0; j < scores.size(); ++j) {
    scores[j] = dot(model.user_factors.row(user), model.item_factors.row(j));
  }
  return top_l(scores, l, exclude);
}

}  // namespace hmcd
