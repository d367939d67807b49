#pragma once

#include <optional>
#include <span>

#include "hmcd/changepoint.hpp"
#include "hmcd/sequence.hpp"

namespace hmcd {

// |truth - predicted| using the strongest predicted index. An empty prediction
// scores the worst case max(truth, length - truth).
std::size_t displacement_error(std::size_t truth, const ChangePointSet& predicted, std::size_t length);

// Held-out items are treated as a set of distinct items (first occurrence wins).
double precision_at_k(std::span<const ItemIndex> recs, std::span<const ItemIndex> heldout, std::size_t k);

// nullopt when the held-out list is empty (the user is skipped).
std::optional<double> recall_at_k(std::span<const ItemIndex> recs, std::span<const ItemIndex> heldout,
                                  std::size_t k);

// Time-aware nDCG: the item at temporal position p of the distinct held-out list
// has gain |H| - p; the ideal ranking is temporal order. nullopt when H is empty.
std::optional<double> ndcg_at_k(std::span<const ItemIndex> recs, std::span<const ItemIndex> heldout,
                                std::size_t k);

}  // namespace hmcd
