#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hmcd/hmm.hpp"
#include "hmcd/sequence.hpp"

namespace hmcd {

// Bijection between external item ids and dense indices, in first-appearance order.
class Vocabulary {
 public:
  // Index of `id`, inserting it when new.
  ItemIndex intern(std::string_view id);
  std::optional<ItemIndex> find(std::string_view id) const;
  const std::string& id(ItemIndex index) const { return ids_.at(index); }
  std::size_t size() const noexcept { return ids_.size(); }
  std::span<const std::string> ids() const noexcept { return ids_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.ids_ == b.ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, ItemIndex> index_;
};

// One id per line.
void write_vocabulary(std::ostream& out, const Vocabulary& vocab);
Vocabulary read_vocabulary(std::istream& in);

struct LabeledSequence {
  InteractionSequence sequence;
  std::size_t change_point = 0;  // first index of the second source
  std::string src1;
  std::string src2;

  friend bool operator==(const LabeledSequence&, const LabeledSequence&) = default;
};

struct GroundTruth {
  std::size_t change_point = 0;
  std::string src1;
  std::string src2;
};

struct Dataset {
  Vocabulary vocab;
  std::vector<InteractionSequence> sequences;
  // Parallel to `sequences` when the file carries change_point/src1/src2 columns, else empty.
  std::vector<GroundTruth> truth;

  bool labeled() const noexcept { return !truth.empty(); }
};

// Reads "user_id,item_id,position" (optionally followed by "change_point,src1,src2").
// Users keep first-appearance order; each user's items are ordered by position.
// With `fixed_vocab`, unknown item ids raise VocabularyError instead of extending it.
Dataset read_interactions(std::istream& in, const Vocabulary* fixed_vocab = nullptr);
Dataset load_interactions(const std::filesystem::path& path, const Vocabulary* fixed_vocab = nullptr);

void write_interactions(std::ostream& out, const Vocabulary& vocab,
                        std::span<const InteractionSequence> seqs);
void write_labeled(std::ostream& out, const Vocabulary& vocab, std::span<const LabeledSequence> seqs);

// Concatenates random windows of two distinct pool sequences. When `groups` is
// non-empty (one label per pool sequence) the two sources come from different groups.
std::vector<LabeledSequence> synth_concat(std::span<const InteractionSequence> pool, std::size_t count,
                                          std::uint64_t seed, std::size_t min_window,
                                          std::size_t max_window,
                                          std::span<const std::size_t> groups = {});

struct HoldoutEntry {
  std::size_t source = 0;  // index into the input sequences
  InteractionSequence prefix;
  std::vector<ItemIndex> heldout;  // temporal order preserved
};

struct HoldoutSplit {
  std::vector<HoldoutEntry> entries;
  std::size_t skipped = 0;  // sequences with T <= n
};

// Holds out the last n items of every sequence longer than n.
HoldoutSplit holdout_split(std::span<const InteractionSequence> seqs, std::size_t n);

struct PlantedPool {
  std::vector<InteractionSequence> sequences;
  std::vector<std::size_t> states;  // generating state per sequence
  HmmParams generator;              // identity transitions, block emissions
};

// Samples each sequence from one state of a block HMM: state s emits only items
// [s*m/h, (s+1)*m/h) with seeded random weights.
PlantedPool planted_hmm_pool(std::size_t h, std::size_t m, std::span<const std::size_t> lengths,
                             std::uint64_t seed);

// Vocabulary whose ids are the decimal item indices 0..m-1.
Vocabulary index_vocabulary(std::size_t m);

}  // namespace hmcd
