#include "hmcd/changepoint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "hmcd/errors.hpp"
#include "hmcd/text_format.hpp"

namespace hmcd {

std::optional<std::size_t> ChangePointSet::strongest() const {
  if (indices.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t k = 1; k < indices.size(); ++k) {
    if (scores[k] > scores[best]) best = k;
  }
  return indices[best];
}

ScoreMode parse_score_mode(std::string_view name) {
  if (name == "raw") return ScoreMode::raw;
  if (name == "candidate-max") return ScoreMode::candidate_max;
  throw ConfigError("unknown score mode '" + std::string(name) + "'");
}

std::string_view to_string(ScoreMode mode) {
  return mode == ScoreMode::raw ? "raw" : "candidate-max";
}

double ItemFactors::distance(ItemIndex a, ItemIndex b) const {
  if (a >= factors.rows() || b >= factors.rows()) {
    throw VocabularyError("no latent factors for item " + std::to_string(std::max(a, b)));
  }
  const auto ra = factors.row(a);
  const auto rb = factors.row(b);
  double s = 0.0;
  for (std::size_t k = 0; k < ra.size(); ++k) {
    const double d = ra[k] - rb[k];
    s += d * d;
  }
  return std::sqrt(s);
}

ChangePointSet hmcd_detect(const HmmParams& model, const InteractionSequence& seq,
                           const DetectionConfig& config) {
  if (seq.empty()) throw EmptyInputError("hmcd_detect: empty sequence");
  const auto vit = viterbi_decode(model, seq);

  ChangePointSet candidates;
  for (std::size_t t = 1; t < seq.size(); ++t) {
    if (vit.path[t] != vit.path[t - 1]) {
      candidates.indices.push_back(t);
      candidates.scores.push_back(vit.step_scores[t]);
    }
  }
  if (candidates.empty()) return candidates;

  if (config.score_mode == ScoreMode::candidate_max) {
    const double top = *std::max_element(candidates.scores.begin(), candidates.scores.end());
    for (double& s : candidates.scores) s = top > 0.0 ? s / top : 0.0;
  }

  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (candidates.scores[k] > config.tau) keep.push_back(k);
  }
  if (config.max_changes && keep.size() > *config.max_changes) {
    std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
      return candidates.scores[a] > candidates.scores[b];
    });
    keep.resize(*config.max_changes);
    std::sort(keep.begin(), keep.end());
  }

  ChangePointSet out;
  for (const std::size_t k : keep) {
    out.indices.push_back(candidates.indices[k]);
    out.scores.push_back(candidates.scores[k]);
  }
  return out;
}

std::vector<InteractionSequence> segment(const InteractionSequence& seq, const ChangePointSet& cps) {
  std::size_t prev = 0;
  for (const std::size_t idx : cps.indices) {
    if (idx <= prev || idx >= seq.size()) {
      throw InvalidChangePointError("change point " + std::to_string(idx) +
                                    " invalid for sequence of length " + std::to_string(seq.size()));
    }
    prev = idx;
  }
  std::vector<InteractionSequence> out;
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    InteractionSequence part{seq.user_id, {}};
    part.items.assign(seq.items.begin() + static_cast<std::ptrdiff_t>(start),
                      seq.items.begin() + static_cast<std::ptrdiff_t>(end));
    out.push_back(std::move(part));
    start = end;
  };
  for (const std::size_t idx : cps.indices) emit(idx);
  emit(seq.size());
  return out;
}

ChangePointSet cusum_detect(const ItemFactors& factors, const InteractionSequence& seq, double tau) {
  if (seq.size() < 2) throw EmptyInputError("cusum_detect: sequence shorter than 2");
  double sum = 0.0;
  for (std::size_t j = 1; j < seq.size(); ++j) {
    sum += factors.distance(seq.items[j - 1], seq.items[j]);
    if (sum > tau) return ChangePointSet{{j}, {sum}};
  }
  return {};
}

double cusum_total(const ItemFactors& factors, const InteractionSequence& seq) {
  double sum = 0.0;
  for (std::size_t j = 1; j < seq.size(); ++j) sum += factors.distance(seq.items[j - 1], seq.items[j]);
  return sum;
}

std::vector<double> sliding_window_objective(const ItemFactors& factors,
                                             const InteractionSequence& seq) {
  const std::size_t T = seq.size();
  if (T < 2) throw EmptyInputError("sliding_window_detect: sequence shorter than 2");

  // col[b] = sum_{a<b} D(a,b); row[a] = sum_{b>a} D(a,b).
  std::vector<double> col(T, 0.0), row(T, 0.0);
  double total = 0.0;
  for (std::size_t a = 0; a < T; ++a) {
    for (std::size_t b = a + 1; b < T; ++b) {
      const double d = factors.distance(seq.items[a], seq.items[b]);
      col[b] += d;
      row[a] += d;
      total += d;
    }
  }
  // left[t] = intra sum over [0, t); right[t] = intra sum over [t, T).
  std::vector<double> left(T + 1, 0.0), right(T + 1, 0.0);
  for (std::size_t t = 1; t <= T; ++t) left[t] = left[t - 1] + col[t - 1];
  for (std::size_t t = T; t-- > 0;) right[t] = right[t + 1] + row[t];

  auto pairs = [](std::size_t n) { return static_cast<double>(n) * static_cast<double>(n - 1) / 2.0; };
  std::vector<double> obj(T - 1);
  for (std::size_t t = 1; t < T; ++t) {
    const std::size_t nl = t;
    const std::size_t nr = T - t;
    const double cross = total - left[t] - right[t];
    const double mean_cross = cross / (static_cast<double>(nl) * static_cast<double>(nr));
    const double mean_left = nl > 1 ? left[t] / pairs(nl) : 0.0;
    const double mean_right = nr > 1 ? right[t] / pairs(nr) : 0.0;
    obj[t - 1] = mean_cross - 0.5 * (mean_left + mean_right);
  }
  return obj;
}

ChangePointSet sliding_window_detect(const ItemFactors& factors, const InteractionSequence& seq) {
  const auto obj = sliding_window_objective(factors, seq);
  std::size_t best = 0;
  for (std::size_t k = 1; k < obj.size(); ++k) {
    // Values equal up to summation-order rounding count as ties.
    const double slack = 1e-12 * std::max(1.0, std::abs(obj[best]));
    if (obj[k] > obj[best] + slack) best = k;
  }
  return ChangePointSet{{best + 1}, {obj[best]}};
}

ChangePointSet random_partition(const InteractionSequence& seq, std::uint64_t seed) {
  if (seq.size() < 2) throw EmptyInputError("random_partition: sequence shorter than 2");
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<std::size_t> pick(1, seq.size() - 1);
  return ChangePointSet{{pick(gen)}, {1.0}};
}

void write_change_points(std::ostream& out, const std::string& user_id, const ChangePointSet& cps,
                         bool header) {
  if (header) out << "user_id,index,score\n";
  for (std::size_t k = 0; k < cps.size(); ++k) {
    out << user_id << ',' << cps.indices[k] << ',' << format_double(cps.scores[k]) << '\n';
  }
}

}  // namespace hmcd
