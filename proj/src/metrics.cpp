#include "hmcd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hmcd/errors.hpp"

namespace hmcd {
namespace {

std::vector<ItemIndex> distinct_in_order(std::span<const ItemIndex> items) {
  std::vector<ItemIndex> out;
  for (const ItemIndex i : items) {
    if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
  }
  return out;
}

std::size_t hits_at_k(std::span<const ItemIndex> recs, std::span<const ItemIndex> truth, std::size_t k) {
  std::size_t hits = 0;
  const std::size_t n = std::min(k, recs.size());
  for (std::size_t r = 0; r < n; ++r) {
    if (std::find(truth.begin(), truth.end(), recs[r]) != truth.end()) ++hits;
  }
  return hits;
}

void check_k(std::size_t k) {
  if (k < 1) throw InvalidParameterError("cutoff k must be >= 1");
}

}  // namespace

std::size_t displacement_error(std::size_t truth, const ChangePointSet& predicted, std::size_t length) {
  const auto best = predicted.strongest();
  if (!best) return std::max(truth, length > truth ? length - truth : 0);
  return truth > *best ? truth - *best : *best - truth;
}

double precision_at_k(std::span<const ItemIndex> recs, std::span<const ItemIndex> heldout, std::size_t k) {
  check_k(k);
  const auto truth = distinct_in_order(heldout);
  return static_cast<double>(hits_at_k(recs, truth, k)) / static_cast<double>(k);
}

std::optional<double> recall_at_k(std::span<const ItemIndex> recs, std::span<const ItemIndex> heldout,
                                  std::size_t k) {
  check_k(k);
  const auto truth = distinct_in_order(heldout);
  if (truth.empty()) return std::nullopt;
  return static_cast<double>(hits_at_k(recs, truth, k)) / static_cast<double>(truth.size());
}

std::optional<double> ndcg_at_k(std::span<const ItemIndex> recs, std::span<const ItemIndex> heldout,
                                std::size_t k) {
  check_k(k);
  const auto truth = distinct_in_order(heldout);
  if (truth.empty()) return std::nullopt;
  const double size = static_cast<double>(truth.size());
  auto gain = [&](ItemIndex item) {
    const auto it = std::find(truth.begin(), truth.end(), item);
    return it == truth.end() ? 0.0 : size - static_cast<double>(it - truth.begin());
  };
  double dcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, recs.size()); ++r) {
    dcg += gain(recs[r]) / std::log2(static_cast<double>(r) + 2.0);
  }
  double idcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, truth.size()); ++r) {
    idcg += (size - static_cast<double>(r)) / std::log2(static_cast<double>(r) + 2.0);
  }
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

}  // namespace hmcd
