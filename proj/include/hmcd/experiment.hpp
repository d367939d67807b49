#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hmcd/changepoint.hpp"
#include "hmcd/data.hpp"
#include "hmcd/factorization.hpp"
#include "hmcd/hmm.hpp"
#include "hmcd/recommenders.hpp"

namespace hmcd {

enum class Method { poprank, mc, bpr, nmf, smf };
enum class Detector { hmcd, cusum, sw, rp };

Method parse_method(std::string_view name);
Detector parse_detector(std::string_view name);
std::string_view to_string(Method m);
std::string_view to_string(Detector d);

struct ExperimentConfig {
  std::vector<std::string> methods{"poprank", "mc", "bpr", "nmf", "smf"};
  std::vector<std::string> detectors{"hmcd"};
  std::vector<std::size_t> cutoffs{1, 5, 10};
  std::vector<std::size_t> ndcg_cutoffs{5, 10};
  std::size_t holdout = 10;

  std::size_t hmm_states = 2;
  int hmm_max_iters = 100;
  double hmm_tolerance = 1e-5;
  double hmm_smoothing = 1e-6;

  // HMCD threshold for change-point error reports; SMF tunes over tau_grid
  // (falls back to tau when the grid is empty).
  double tau = 0.93;
  std::vector<double> tau_grid{0.5, 0.7, 0.9, 0.93};
  ScoreMode score_mode = ScoreMode::candidate_max;
  std::optional<std::size_t> max_changes;

  std::size_t factors = 40;
  int nmf_iters = 200;
  int fold_in_iters = 200;
  std::size_t detector_factors = 10;
  BprConfig bpr;

  std::uint64_t seed = 0;
  Execution execution = Execution::parallel;
};

// Seeds of the individual components, all derived from ExperimentConfig::seed.
std::uint64_t hmm_seed(const ExperimentConfig& c);
std::uint64_t nmf_seed(const ExperimentConfig& c);
std::uint64_t bpr_seed(const ExperimentConfig& c);
std::uint64_t partition_seed(const ExperimentConfig& c, std::size_t sequence);
std::uint64_t detector_factor_seed(const ExperimentConfig& c);

// Rows of q from a rank-`rank` NMF of the binary user x item matrix of `seqs`.
ItemFactors learn_item_factors(std::span<const InteractionSequence> seqs, std::size_t num_items,
                               std::size_t rank, std::uint64_t seed, Execution exec);

HmmParams fit_detector_hmm(std::span<const InteractionSequence> seqs, std::size_t num_items,
                           const ExperimentConfig& c);

// Everything a detector needs besides the sequence. Only the member matching
// `kind` has to be set.
struct DetectorSetup {
  Detector kind = Detector::hmcd;
  std::optional<HmmParams> hmm;
  std::optional<ItemFactors> factors;
};

// Prepares the detector for `seqs` (fits the HMM or the item factors).
DetectorSetup prepare_detector(Detector kind, std::span<const InteractionSequence> seqs,
                               std::size_t num_items, const ExperimentConfig& c);

// Runs the detector over every sequence. `threshold` is tau for HMCD and the
// cumulative-sum threshold for CUSUM; SW and RP ignore it. Sequences too short
// for a detector yield an empty set.
std::vector<ChangePointSet> detect_all(const DetectorSetup& setup,
                                       std::span<const InteractionSequence> seqs, double threshold,
                                       const ExperimentConfig& c);

// Top-l lists for every training sequence. SMF needs `segmentation` (one set per
// sequence); every other method ignores it.
std::vector<Recommendation> recommend_users(Method method, std::span<const InteractionSequence> train,
                                            std::size_t num_items, std::size_t l,
                                            const ExperimentConfig& c,
                                            std::span<const ChangePointSet> segmentation = {},
                                            bool exclude_seen = true);

struct TauChoice {
  double tau = 0.0;
  double score = 0.0;
  std::vector<double> scores;  // parallel to the grid
};

// Grid member with the highest validation score; ties go to the smaller tau.
TauChoice tune_tau(std::span<const double> grid, const std::function<double(double)>& validation_score);

struct MethodResult {
  std::string label;
  std::vector<double> means;                 // parallel to MetricReport::columns
  std::vector<std::vector<double>> per_user;  // [column][user]
  std::size_t evaluated = 0;
  std::optional<double> tau;
};

struct DetectionResult {
  std::string detector;
  double mean_delta = 0.0;
  double std_delta = 0.0;
  std::size_t count = 0;
  std::optional<double> threshold;
  std::vector<std::size_t> deltas;
};

struct MetricReport {
  std::vector<std::string> columns;  // "P@1", ..., "R@10", "nDCG@5", ...
  std::vector<MethodResult> methods;
  std::vector<DetectionResult> detection;
  std::size_t skipped_users = 0;
};

// Holdout evaluation of every configured method and, when the dataset carries
// ground truth, the change-point error of every configured detector.
MetricReport run_experiment(const Dataset& data, const ExperimentConfig& config);

// Change-point error only.
std::vector<DetectionResult> evaluate_detectors(const Dataset& data, const ExperimentConfig& config);

// method,P@1,...  (values as fractions, or x100 when `percent`).
void write_metric_table(std::ostream& out, const MetricReport& report, bool percent = false);
// detector,mean_delta,std_delta,count
void write_detection_table(std::ostream& out, const MetricReport& report);

}  // namespace hmcd
