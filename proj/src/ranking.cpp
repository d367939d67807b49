#include "hmcd/ranking.hpp"

#include <algorithm>

namespace hmcd {

Recommendation top_l(std::span<const double> scores, std::size_t l,
                     std::span<const ItemIndex> exclude) {
  std::vector<char> banned(scores.size(), 0);
  for (const ItemIndex i : exclude) {
    if (i < scores.size()) banned[i] = 1;
  }
  std::vector<ItemIndex> cand;
  cand.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!banned[i]) cand.push_back(static_cast<ItemIndex>(i));
  }
  const std::size_t n = std::min(l, cand.size());
  auto better = [&](ItemIndex a, ItemIndex b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(n), cand.end(), better);
  Recommendation r;
  r.items.assign(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(n));
  for (const ItemIndex i : r.items) r.scores.push_back(scores[i]);
  return r;
}

}  // namespace hmcd
