#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "hmcd/matrix.hpp"
#include "hmcd/ranking.hpp"
#include "hmcd/sequence.hpp"

namespace hmcd {

// ---- popularity ----

struct PopularityModel {
  std::vector<double> counts;  // interactions per item
};

PopularityModel poprank_fit(std::span<const InteractionSequence> corpus, std::size_t num_items);
Recommendation poprank_recommend(const PopularityModel& model, std::size_t l,
                                 std::span<const ItemIndex> exclude);

// ---- first-order item Markov chain ----

// Sparse row-stochastic successor model estimated from adjacent pairs.
class ItemTransitionModel {
 public:
  struct Successor {
    ItemIndex item;
    double count;
  };

  ItemTransitionModel() = default;
  ItemTransitionModel(std::vector<std::vector<Successor>> successors, PopularityModel popularity);

  std::size_t num_items() const noexcept { return successors_.size(); }
  // Successors of `from` sorted by item index.
  std::span<const Successor> successors(ItemIndex from) const { return successors_.at(from); }
  double outgoing(ItemIndex from) const { return outgoing_.at(from); }
  bool empty_row(ItemIndex from) const { return outgoing_.at(from) == 0.0; }
  // P(to | from); 0 for rows without observed pairs.
  double probability(ItemIndex from, ItemIndex to) const;
  const PopularityModel& popularity() const noexcept { return popularity_; }

 private:
  std::vector<std::vector<Successor>> successors_;
  std::vector<double> outgoing_;
  PopularityModel popularity_;
};

ItemTransitionModel mc_fit(std::span<const InteractionSequence> corpus, std::size_t num_items);

// Successors of last_item by probability, backfilled with popularity order.
// An item with no observed successors falls back to popularity alone.
Recommendation mc_recommend(const ItemTransitionModel& model, ItemIndex last_item, std::size_t l,
                            std::span<const ItemIndex> exclude);

// ---- Bayesian personalized ranking ----

struct BprConfig {
  std::size_t factors = 40;
  int epochs = 30;
  double learning_rate = 0.01;
  double regularization = 0.0;
  double init_stddev = 0.1;
  std::uint64_t seed = 0;
};

struct BprModel {
  Matrix user_factors;  // n x f
  Matrix item_factors;  // m x f
  double learning_rate = 0.01;
  double regularization = 0.0;
  std::uint64_t seed = 0;
  // Users without any positive or without any negative item; they are not trained.
  std::vector<std::size_t> skipped_users;
};

// Pairwise loss of one (user, positive, negative) triple:
//   -ln sigmoid(u.(i - j)) + reg/2 (|u|^2 + |i|^2 + |j|^2)
double bpr_triple_loss(std::span<const double> u, std::span<const double> i,
                       std::span<const double> j, double reg);

// Gradient of bpr_triple_loss with respect to u, i and j (written into the outputs).
void bpr_triple_gradient(std::span<const double> u, std::span<const double> i,
                         std::span<const double> j, double reg, std::span<double> grad_u,
                         std::span<double> grad_i, std::span<double> grad_j);

// user_items[u] lists the positive items of user u (any order, duplicates allowed).
BprModel bpr_fit(std::span<const std::vector<ItemIndex>> user_items, std::size_t num_items,
                 const BprConfig& config);

// Mean pairwise loss over every (u, i, j) triple, for diagnostics.
double bpr_mean_loss(const BprModel& model, std::span<const std::vector<ItemIndex>> user_items);

Recommendation bpr_recommend(const BprModel& model, std::size_t user, std::size_t l,
                             std::span<const ItemIndex> exclude);

}  // namespace hmcd
