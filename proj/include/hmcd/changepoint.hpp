#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmcd/hmm.hpp"
#include "hmcd/matrix.hpp"
#include "hmcd/sequence.hpp"

namespace hmcd {

// Detected change points. indices[k] is the first position of a new segment,
// strictly increasing and within [1, T-1]; scores[k] is the detector's score for it.
struct ChangePointSet {
  std::vector<std::size_t> indices;
  std::vector<double> scores;

  std::size_t size() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }

  // Index of the highest score; ties resolve to the earliest index.
  std::optional<std::size_t> strongest() const;

  friend bool operator==(const ChangePointSet&, const ChangePointSet&) = default;
};

enum class ScoreMode {
  raw,            // literal transition * emission product
  candidate_max,  // product divided by the sequence's largest candidate product
};

struct DetectionConfig {
  double tau = 0.93;
  ScoreMode score_mode = ScoreMode::candidate_max;
  std::optional<std::size_t> max_changes;
};

ScoreMode parse_score_mode(std::string_view name);
std::string_view to_string(ScoreMode mode);

// Latent factors per item (rows), used as the distance space of the baseline detectors.
struct ItemFactors {
  Matrix factors;  // m x d

  std::size_t num_items() const noexcept { return factors.rows(); }
  double distance(ItemIndex a, ItemIndex b) const;
};

// HMM change-point detection: Viterbi-decode, keep state switches whose
// (mode-adjusted) transition * emission score exceeds tau.
ChangePointSet hmcd_detect(const HmmParams& model, const InteractionSequence& seq,
                           const DetectionConfig& config);

// Splits seq into |cps| + 1 contiguous non-empty segments.
std::vector<InteractionSequence> segment(const InteractionSequence& seq, const ChangePointSet& cps);

// First j in [1, T-1] whose cumulative adjacent-item distance S_j exceeds tau.
ChangePointSet cusum_detect(const ItemFactors& factors, const InteractionSequence& seq, double tau);

// Final cumulative sum S_{T-1} of a sequence (0 for T < 2).
double cusum_total(const ItemFactors& factors, const InteractionSequence& seq);

// Split maximizing mean inter-partition distance minus the average of the two
// mean intra-partition distances. Ties go to the smallest split.
ChangePointSet sliding_window_detect(const ItemFactors& factors, const InteractionSequence& seq);

// Sliding-window objective for every split t = 1..T-1 (entry t-1).
std::vector<double> sliding_window_objective(const ItemFactors& factors,
                                             const InteractionSequence& seq);

// One index drawn uniformly from [1, T-1].
ChangePointSet random_partition(const InteractionSequence& seq, std::uint64_t seed);

// Writes "user_id,index,score" rows, header included when `header` is set.
void write_change_points(std::ostream& out, const std::string& user_id, const ChangePointSet& cps,
                         bool header = false);

}  // namespace hmcd
