#include "hmcd/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>

#include "hmcd/errors.hpp"
#include "hmcd/metrics.hpp"
#include "hmcd/random.hpp"
#include "hmcd/text_format.hpp"

namespace hmcd {
namespace {

// Cutoff used to pick tau on the validation split.
constexpr std::size_t kTuneCutoff = 10;

// CUSUM thresholds are searched as multiples of the mean total cumulative sum,
// up to 1.5x. Change-point error is cheap to score and uses a fine grid; the SMF
// validation refits the factor model per candidate and uses a coarse one.
constexpr int kFineCusumSteps = 30;
constexpr int kCoarseCusumSteps = 6;

std::vector<double> cusum_grid(double mean_total, int steps) {
  std::vector<double> grid;
  for (int k = 1; k <= steps; ++k) grid.push_back(mean_total * 1.5 * k / steps);
  return grid;
}

// Runs fn(i) for i in [0, n), in parallel when requested. The first exception
// thrown by any iteration is rethrown on the calling thread.
template <typename Fn>
void for_each_index(std::size_t n, Execution exec, Fn&& fn) {
  std::exception_ptr error;
  std::mutex guard;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 8) if (exec == Execution::parallel)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(guard);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

std::span<const ItemIndex> seen(const InteractionSequence& s, bool exclude) {
  return exclude ? std::span<const ItemIndex>(s.items) : std::span<const ItemIndex>();
}

double mean_cusum_total(const ItemFactors& factors, std::span<const InteractionSequence> seqs) {
  if (seqs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : seqs) total += cusum_total(factors, s);
  return total / static_cast<double>(seqs.size());
}

std::vector<InteractionSequence> prefixes_of(const HoldoutSplit& split) {
  std::vector<InteractionSequence> out;
  out.reserve(split.entries.size());
  for (const auto& e : split.entries) out.push_back(e.prefix);
  return out;
}

std::vector<double> grid_for(const DetectorSetup& setup, std::span<const InteractionSequence> seqs,
                             const ExperimentConfig& c) {
  switch (setup.kind) {
    case Detector::hmcd:
      return c.tau_grid.empty() ? std::vector<double>{c.tau} : c.tau_grid;
    case Detector::cusum:
      return cusum_grid(mean_cusum_total(*setup.factors, seqs), kCoarseCusumSteps);
    case Detector::sw:
    case Detector::rp:
      break;
  }
  return {0.0};
}

std::string smf_label(Detector d, const ExperimentConfig& c, double tau) {
  switch (d) {
    case Detector::hmcd:
      return "SMF-hmcd-S" + std::to_string(c.hmm_states) + "(tau=" + format_double(tau) + ")";
    case Detector::cusum:
      return "SMF-cusum(tau=" + format_fixed(tau, 3) + ")";
    case Detector::sw:
      return "SMF-sw";
    case Detector::rp:
      return "SMF-rp";
  }
  return "SMF";
}

std::string method_label(Method m) {
  switch (m) {
    case Method::poprank: return "PopRank";
    case Method::mc: return "MC";
    case Method::bpr: return "BPR";
    case Method::nmf: return "NMF";
    case Method::smf: return "SMF";
  }
  return "?";
}

std::vector<double> mean_precision(std::span<const Recommendation> recs, const HoldoutSplit& split,
                                   std::size_t k) {
  std::vector<double> v(split.entries.size());
  for (std::size_t u = 0; u < v.size(); ++u) v[u] = precision_at_k(recs[u].items, split.entries[u].heldout, k);
  return v;
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

MethodResult score_lists(std::string label, std::span<const Recommendation> recs, const HoldoutSplit& split,
                         const ExperimentConfig& c) {
  MethodResult r;
  r.label = std::move(label);
  r.evaluated = split.entries.size();
  const std::size_t n = split.entries.size();
  for (const std::size_t k : c.cutoffs) {
    std::vector<double> v(n);
    for (std::size_t u = 0; u < n; ++u) v[u] = precision_at_k(recs[u].items, split.entries[u].heldout, k);
    r.per_user.push_back(std::move(v));
  }
  for (const std::size_t k : c.cutoffs) {
    std::vector<double> v(n);
    for (std::size_t u = 0; u < n; ++u) v[u] = recall_at_k(recs[u].items, split.entries[u].heldout, k).value();
    r.per_user.push_back(std::move(v));
  }
  for (const std::size_t k : c.ndcg_cutoffs) {
    std::vector<double> v(n);
    for (std::size_t u = 0; u < n; ++u) v[u] = ndcg_at_k(recs[u].items, split.entries[u].heldout, k).value();
    r.per_user.push_back(std::move(v));
  }
  for (const auto& col : r.per_user) r.means.push_back(mean_of(col));
  return r;
}

std::size_t list_length(const ExperimentConfig& c) {
  std::size_t l = kTuneCutoff;
  for (const std::size_t k : c.cutoffs) l = std::max(l, k);
  for (const std::size_t k : c.ndcg_cutoffs) l = std::max(l, k);
  return l;
}

void check_config(const ExperimentConfig& c) {
  for (const auto& m : c.methods) parse_method(m);
  for (const auto& d : c.detectors) parse_detector(d);
  if (c.holdout < 1) throw ConfigError("holdout must be >= 1");
  if (c.cutoffs.empty()) throw ConfigError("at least one cutoff is required");
  for (const std::size_t k : c.cutoffs) {
    if (k < 1) throw ConfigError("cutoffs must be >= 1");
  }
  for (const std::size_t k : c.ndcg_cutoffs) {
    if (k < 1) throw ConfigError("cutoffs must be >= 1");
  }
  if (c.hmm_states < 1) throw ConfigError("hmm_states must be >= 1");
  if (c.factors < 1 || c.detector_factors < 1) throw ConfigError("factor ranks must be >= 1");
  if (c.tau < 0.0) throw ConfigError("tau must be >= 0");
}

}  // namespace

Method parse_method(std::string_view name) {
  if (name == "poprank") return Method::poprank;
  if (name == "mc") return Method::mc;
  if (name == "bpr") return Method::bpr;
  if (name == "nmf") return Method::nmf;
  if (name == "smf") return Method::smf;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

Detector parse_detector(std::string_view name) {
  if (name == "hmcd") return Detector::hmcd;
  if (name == "cusum") return Detector::cusum;
  if (name == "sw") return Detector::sw;
  if (name == "rp") return Detector::rp;
  throw ConfigError("unknown detector '" + std::string(name) + "'");
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::poprank: return "poprank";
    case Method::mc: return "mc";
    case Method::bpr: return "bpr";
    case Method::nmf: return "nmf";
    case Method::smf: return "smf";
  }
  return "?";
}

std::string_view to_string(Detector d) {
  switch (d) {
    case Detector::hmcd: return "hmcd";
    case Detector::cusum: return "cusum";
    case Detector::sw: return "sw";
    case Detector::rp: return "rp";
  }
  return "?";
}

std::uint64_t hmm_seed(const ExperimentConfig& c) { return derive_seed(c.seed, 1); }
std::uint64_t nmf_seed(const ExperimentConfig& c) { return derive_seed(c.seed, 2); }
std::uint64_t bpr_seed(const ExperimentConfig& c) { return derive_seed(c.seed, 3); }
std::uint64_t partition_seed(const ExperimentConfig& c, std::size_t sequence) {
  return derive_seed(derive_seed(c.seed, 4), sequence);
}
std::uint64_t detector_factor_seed(const ExperimentConfig& c) { return derive_seed(c.seed, 5); }

ItemFactors learn_item_factors(std::span<const InteractionSequence> seqs, std::size_t num_items,
                               std::size_t rank, std::uint64_t seed, Execution exec) {
  std::vector<std::vector<InteractionSequence>> rows;
  for (const auto& s : seqs) {
    if (!s.empty()) rows.push_back({s});
  }
  const auto m = build_segmented_matrix(rows, num_items);
  auto model = nmf_fit(m, rank, 200, seed, exec);
  return ItemFactors{std::move(model.q)};
}

HmmParams fit_detector_hmm(std::span<const InteractionSequence> seqs, std::size_t num_items,
                           const ExperimentConfig& c) {
  FitConfig fc;
  fc.max_iters = c.hmm_max_iters;
  fc.ll_tolerance = c.hmm_tolerance;
  fc.smoothing = c.hmm_smoothing;
  fc.seed = hmm_seed(c);
  fc.execution = c.execution;
  return baum_welch_fit(seqs, c.hmm_states, num_items, fc);
}

DetectorSetup prepare_detector(Detector kind, std::span<const InteractionSequence> seqs,
                               std::size_t num_items, const ExperimentConfig& c) {
  DetectorSetup setup;
  setup.kind = kind;
  if (kind == Detector::hmcd) setup.hmm = fit_detector_hmm(seqs, num_items, c);
  if (kind == Detector::cusum || kind == Detector::sw) {
    setup.factors = learn_item_factors(seqs, num_items, c.detector_factors, detector_factor_seed(c), c.execution);
  }
  return setup;
}

std::vector<ChangePointSet> detect_all(const DetectorSetup& setup,
                                       std::span<const InteractionSequence> seqs, double threshold,
                                       const ExperimentConfig& c) {
  std::vector<ChangePointSet> out(seqs.size());
  DetectionConfig dc{threshold, c.score_mode, c.max_changes};
  for_each_index(seqs.size(), c.execution, [&](std::size_t i) {
    const auto& s = seqs[i];
    switch (setup.kind) {
      case Detector::hmcd:
        if (!s.empty()) out[i] = hmcd_detect(*setup.hmm, s, dc);
        break;
      case Detector::cusum:
        if (s.size() >= 2) out[i] = cusum_detect(*setup.factors, s, threshold);
        break;
      case Detector::sw:
        if (s.size() >= 2) out[i] = sliding_window_detect(*setup.factors, s);
        break;
      case Detector::rp:
        if (s.size() >= 2) out[i] = random_partition(s, partition_seed(c, i));
        break;
    }
  });
  return out;
}

std::vector<Recommendation> recommend_users(Method method, std::span<const InteractionSequence> train,
                                            std::size_t num_items, std::size_t l,
                                            const ExperimentConfig& c,
                                            std::span<const ChangePointSet> segmentation,
                                            bool exclude_seen) {
  std::vector<Recommendation> recs(train.size());
  switch (method) {
    case Method::poprank: {
      const auto model = poprank_fit(train, num_items);
      for (std::size_t u = 0; u < train.size(); ++u) {
        recs[u] = poprank_recommend(model, l, seen(train[u], exclude_seen));
      }
      break;
    }
    case Method::mc: {
      const auto model = mc_fit(train, num_items);
      for_each_index(train.size(), c.execution, [&](std::size_t u) {
        const ItemIndex last = train[u].empty() ? static_cast<ItemIndex>(num_items) : train[u].items.back();
        recs[u] = mc_recommend(model, last, l, seen(train[u], exclude_seen));
      });
      break;
    }
    case Method::bpr: {
      std::vector<std::vector<ItemIndex>> items;
      for (const auto& s : train) items.push_back(s.items);
      BprConfig bc = c.bpr;
      bc.seed = bpr_seed(c);
      const auto model = bpr_fit(items, num_items, bc);
      for_each_index(train.size(), c.execution, [&](std::size_t u) {
        recs[u] = bpr_recommend(model, u, l, seen(train[u], exclude_seen));
      });
      break;
    }
    case Method::nmf:
    case Method::smf: {
      if (method == Method::smf && segmentation.size() != train.size()) {
        throw InvalidParameterError("smf needs one change-point set per sequence");
      }
      // Only users with interactions contribute rows; profiles use the last segment.
      std::vector<std::vector<InteractionSequence>> segments(train.size());
      std::vector<std::vector<InteractionSequence>> rows;
      for (std::size_t u = 0; u < train.size(); ++u) {
        if (train[u].empty()) continue;
        segments[u] = method == Method::smf ? segment(train[u], segmentation[u])
                                            : std::vector<InteractionSequence>{train[u]};
        rows.push_back(segments[u]);
      }
      const auto matrix = build_segmented_matrix(rows, num_items);
      const auto model = nmf_fit(matrix, c.factors, c.nmf_iters, nmf_seed(c), c.execution);
      for_each_index(train.size(), c.execution, [&](std::size_t u) {
        if (segments[u].empty()) return;
        const auto profile = fold_in(model.q, std::span<const ItemIndex>(segments[u].back().items), c.fold_in_iters);
        recs[u] = smf_recommend(profile, model, l, seen(train[u], exclude_seen));
      });
      break;
    }
  }
  for (std::size_t u = 0; u < train.size(); ++u) recs[u].user_id = train[u].user_id;
  return recs;
}

TauChoice tune_tau(std::span<const double> grid, const std::function<double(double)>& validation_score) {
  if (grid.empty()) throw InvalidParameterError("tune_tau: empty grid");
  TauChoice best;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double s = validation_score(grid[g]);
    best.scores.push_back(s);
    if (g == 0 || s > best.score || (s == best.score && grid[g] < best.tau)) {
      best.tau = grid[g];
      best.score = s;
    }
  }
  return best;
}

std::vector<DetectionResult> evaluate_detectors(const Dataset& data, const ExperimentConfig& c) {
  check_config(c);
  if (!data.labeled()) throw ConfigError("change-point error needs a labeled dataset");
  const auto& seqs = data.sequences;
  const std::size_t m = data.vocab.size();
  std::vector<DetectionResult> results;
  for (const auto& name : c.detectors) {
    const Detector d = parse_detector(name);
    const auto setup = prepare_detector(d, seqs, m, c);

    auto deltas_for = [&](double threshold) {
      const auto cps = detect_all(setup, seqs, threshold, c);
      std::vector<std::size_t> deltas(seqs.size());
      for (std::size_t i = 0; i < seqs.size(); ++i) {
        deltas[i] = displacement_error(data.truth[i].change_point, cps[i], seqs[i].size());
      }
      return deltas;
    };
    auto mean_delta = [](const std::vector<std::size_t>& v) {
      double s = 0.0;
      for (const std::size_t x : v) s += static_cast<double>(x);
      return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };

    DetectionResult r;
    r.detector = std::string(to_string(d));
    if (d == Detector::cusum) {
      // Threshold search starts from the mean cumulative sum and minimizes the error.
      const auto grid = cusum_grid(mean_cusum_total(*setup.factors, seqs), kFineCusumSteps);
      const auto choice = tune_tau(grid, [&](double t) { return -mean_delta(deltas_for(t)); });
      r.threshold = choice.tau;
      r.deltas = deltas_for(choice.tau);
    } else if (d == Detector::hmcd) {
      r.threshold = c.tau;
      r.deltas = deltas_for(c.tau);
    } else {
      r.deltas = deltas_for(0.0);
    }
    r.count = r.deltas.size();
    r.mean_delta = mean_delta(r.deltas);
    double var = 0.0;
    for (const std::size_t x : r.deltas) var += (static_cast<double>(x) - r.mean_delta) * (static_cast<double>(x) - r.mean_delta);
    r.std_delta = r.count ? std::sqrt(var / static_cast<double>(r.count)) : 0.0;
    results.push_back(std::move(r));
  }
  return results;
}

MetricReport run_experiment(const Dataset& data, const ExperimentConfig& c) {
  check_config(c);
  const std::size_t m = data.vocab.size();
  const auto split = holdout_split(data.sequences, c.holdout);
  if (split.entries.empty()) throw EmptyInputError("no sequence is longer than the holdout");
  const auto train = prefixes_of(split);
  const std::size_t l = list_length(c);

  MetricReport report;
  report.skipped_users = split.skipped;
  for (const std::size_t k : c.cutoffs) report.columns.push_back("P@" + std::to_string(k));
  for (const std::size_t k : c.cutoffs) report.columns.push_back("R@" + std::to_string(k));
  for (const std::size_t k : c.ndcg_cutoffs) report.columns.push_back("nDCG@" + std::to_string(k));

  for (const auto& name : c.methods) {
    const Method method = parse_method(name);
    if (method != Method::smf) {
      const auto recs = recommend_users(method, train, m, l, c);
      report.methods.push_back(score_lists(method_label(method), recs, split, c));
      continue;
    }
    for (const auto& dname : c.detectors) {
      const Detector d = parse_detector(dname);
      const auto setup = prepare_detector(d, train, m, c);
      const auto grid = grid_for(setup, train, c);
      double tau = grid.front();
      if (grid.size() > 1) {
        const auto val = holdout_split(train, c.holdout);
        if (val.entries.empty()) throw EmptyInputError("tune_tau: empty validation split");
        const auto val_train = prefixes_of(val);
        const auto choice = tune_tau(grid, [&](double t) {
          const auto cps = detect_all(setup, val_train, t, c);
          const auto recs = recommend_users(Method::smf, val_train, m, kTuneCutoff, c, cps);
          return mean_of(mean_precision(recs, val, kTuneCutoff));
        });
        tau = choice.tau;
      }
      const auto cps = detect_all(setup, train, tau, c);
      const auto recs = recommend_users(Method::smf, train, m, l, c, cps);
      auto result = score_lists(smf_label(d, c, tau), recs, split, c);
      if (d == Detector::hmcd || d == Detector::cusum) result.tau = tau;
      report.methods.push_back(std::move(result));
    }
  }

  if (data.labeled()) report.detection = evaluate_detectors(data, c);
  return report;
}

void write_metric_table(std::ostream& out, const MetricReport& report, bool percent) {
  out << "method";
  for (const auto& col : report.columns) out << ',' << col;
  out << '\n';
  for (const auto& r : report.methods) {
    out << r.label;
    for (const double v : r.means) out << ',' << format_fixed(percent ? 100.0 * v : v, percent ? 2 : 6);
    out << '\n';
  }
}

void write_detection_table(std::ostream& out, const MetricReport& report) {
  out << "detector,mean_delta,std_delta,count\n";
  for (const auto& d : report.detection) {
    out << d.detector << ',' << format_fixed(d.mean_delta, 4) << ',' << format_fixed(d.std_delta, 4) << ','
        << d.count << '\n';
  }
}

}  // namespace hmcd
