#pragma once

#include <span>
#include <string>
#include <vector>

#include "hmcd/sequence.hpp"

namespace hmcd {

// A ranked top-l list. Scores are non-increasing; equal scores are ordered by item index.
struct Recommendation {
  std::string user_id;
  std::vector<ItemIndex> items;
  std::vector<double> scores;

  friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

// Top-l items by descending score, ties by ascending index, skipping `exclude`.
Recommendation top_l(std::span<const double> scores, std::size_t l,
                     std::span<const ItemIndex> exclude);

}  // namespace hmcd
