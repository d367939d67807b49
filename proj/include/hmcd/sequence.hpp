#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hmcd {

using ItemIndex = std::uint32_t;

// One user's interactions in temporal order; items are dense vocabulary indices.
struct InteractionSequence {
  std::string user_id;
  std::vector<ItemIndex> items;

  std::size_t size() const noexcept { return items.size(); }
  bool empty() const noexcept { return items.empty(); }

  friend bool operator==(const InteractionSequence&, const InteractionSequence&) = default;
};

}  // namespace hmcd
