#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "hmcd/changepoint.hpp"
#include "hmcd/data.hpp"
#include "hmcd/errors.hpp"
#include "hmcd/experiment.hpp"
#include "hmcd/hmm.hpp"
#include "hmcd/random.hpp"
#include "hmcd/text_format.hpp"

namespace hmcd::cli {
namespace {

const std::vector<std::string> kMethods{"poprank", "mc", "bpr", "nmf", "smf"};
const std::vector<std::string> kDetectors{"hmcd", "cusum", "sw", "rp"};
const std::vector<std::string> kModes{"raw", "candidate-max"};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  int threads = 0;
  bool verbose = false;
};

struct SynthArgs {
  std::vector<std::string> planted;
  std::string pool;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::size_t min_window = 20;
  std::size_t max_window = 80;
  bool allow_same_source = false;
  std::string output;
};

struct FitArgs {
  std::string input;
  std::size_t states = 2;
  int max_iters = 100;
  double tol = 1e-5;
  double smoothing = 1e-6;
  std::uint64_t seed = 0;
  std::string output;
  std::string vocab_out;
};

struct DetectArgs {
  std::string input;
  std::string detector = "hmcd";
  std::string model;
  std::string vocab;
  double tau = 0.93;
  std::string mode = "candidate-max";
  std::optional<std::size_t> max_changes;
  std::optional<double> cusum_tau;
  std::size_t factors = 10;
  std::uint64_t seed = 0;
  std::string output;
};

struct RecommendArgs {
  std::string input;
  std::string method;
  std::size_t l = 10;
  std::string detector = "hmcd";
  std::string change_points;
  std::string model;
  std::string vocab;
  std::size_t states = 2;
  double tau = 0.93;
  std::string mode = "candidate-max";
  std::size_t factors = 40;
  int nmf_iters = 200;
  int epochs = 30;
  std::uint64_t seed = 0;
  bool exclude_seen = false;
  std::string output;
};

struct EvaluateArgs {
  std::string input;
  std::vector<std::string> methods{"poprank", "mc", "bpr", "nmf", "smf"};
  std::vector<std::string> detectors{"hmcd"};
  std::vector<std::size_t> k{1, 5, 10};
  std::vector<std::size_t> ndcg_k{5, 10};
  std::size_t holdout = 10;
  std::size_t states = 2;
  double tau = 0.93;
  std::vector<double> tau_grid{0.5, 0.7, 0.9, 0.93};
  std::string mode = "candidate-max";
  std::size_t factors = 40;
  int nmf_iters = 200;
  int epochs = 30;
  std::uint64_t seed = 0;
  bool percent = false;
  std::string output;
  std::string cp_output;
};

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

void finish(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw Error("failed writing '" + path + "'");
}

// Records the resolved configuration of a run next to its main artifact:
// global options, then the subcommand's options, one `name=value` per line.
void write_run_config(const CLI::App& app, const CLI::App& sub, const std::string& output) {
  const std::string path = output + ".config";
  auto out = open_output(path);
  auto dump = [&out](const CLI::App& a, const std::string& prefix) {
    for (const CLI::Option* opt : a.get_options()) {
      if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
      std::string value;
      if (opt->count() > 0) {
        for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
      } else {
        value = opt->get_default_str();
        if (value.empty() && opt->get_expected_max() == 0) value = "false";
      }
      out << prefix << opt->get_lnames().front() << '=' << value << '\n';
    }
  };
  dump(app, "");
  out << "command=" << sub.get_name() << '\n';
  dump(sub, sub.get_name() + ".");
  finish(out, path);
}

bool to_stdout(const std::string& path) { return path.empty() || path == "-"; }

void emit(const std::string& path, const std::string& content, std::ostream& sink) {
  if (to_stdout(path)) {
    sink << content;
    return;
  }
  auto out = open_output(path);
  out << content;
  finish(out, path);
}

std::map<std::string, std::string> parse_pairs(const std::vector<std::string>& pairs) {
  std::map<std::string, std::string> kv;
  for (const auto& p : pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("expected key=value, got '" + p + "'");
    kv[p.substr(0, eq)] = p.substr(eq + 1);
  }
  return kv;
}

std::size_t take_count(std::map<std::string, std::string>& kv, const std::string& key, std::size_t fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  long long v = 0;
  try {
    v = parse_integer(it->second);
  } catch (const ParseError&) {
    throw UsageError("--planted " + key + " must be an integer");
  }
  if (v < 0) throw UsageError("--planted " + key + " must be non-negative");
  kv.erase(it);
  return static_cast<std::size_t>(v);
}

std::string vocab_path_for(const std::string& explicit_path, const std::string& model_path) {
  return explicit_path.empty() ? model_path + ".vocab" : explicit_path;
}

// Loads a model and its vocabulary, checking that they agree.
std::pair<HmmParams, Vocabulary> load_model(const std::string& model_path, const std::string& vocab_path) {
  auto min = open_input(model_path);
  HmmParams model = load_hmm(min);
  auto vin = open_input(vocab_path);
  Vocabulary vocab = read_vocabulary(vin);
  if (vocab.size() != model.num_items) {
    throw VocabularyError("model has " + std::to_string(model.num_items) + " items but vocabulary '" + vocab_path +
                          "' has " + std::to_string(vocab.size()));
  }
  return {std::move(model), std::move(vocab)};
}

void run_synth(const SynthArgs& a, const Common& common, std::ostream& sink, std::ostream& log) {
  if (a.planted.empty() == a.pool.empty()) throw UsageError("synth needs exactly one of --planted or --pool");
  std::vector<LabeledSequence> out;
  Vocabulary vocab;
  if (!a.planted.empty()) {
    auto kv = parse_pairs(a.planted);
    const std::size_t h = take_count(kv, "h", 2);
    const std::size_t m = take_count(kv, "m", 100);
    const std::size_t pool_size = take_count(kv, "pool", 200);
    const std::size_t length = take_count(kv, "length", 100);
    if (!kv.empty()) throw UsageError("unknown --planted key '" + kv.begin()->first + "'");
    const std::vector<std::size_t> lengths(pool_size, length);
    const auto pool = planted_hmm_pool(h, m, lengths, derive_seed(a.seed, 0));
    std::span<const std::size_t> groups;
    if (!a.allow_same_source) groups = pool.states;
    out = synth_concat(pool.sequences, a.count, derive_seed(a.seed, 1), a.min_window, a.max_window, groups);
    vocab = index_vocabulary(m);
  } else {
    const auto pool = load_interactions(a.pool);
    out = synth_concat(pool.sequences, a.count, derive_seed(a.seed, 1), a.min_window, a.max_window);
    vocab = pool.vocab;
  }
  std::ostringstream file;
  write_labeled(file, vocab, out);
  emit(a.output, file.str(), sink);
  if (common.verbose) log << "wrote " << out.size() << " labeled sequences to " << a.output << '\n';
}

void run_fit(const FitArgs& a, const Common& common, std::ostream& log) {
  const auto data = load_interactions(a.input);
  FitConfig fc;
  fc.max_iters = a.max_iters;
  fc.ll_tolerance = a.tol;
  fc.smoothing = a.smoothing;
  fc.seed = a.seed;
  const auto fit = fit_hmm(data.sequences, a.states, data.vocab.size(), fc);
  auto out = open_output(a.output);
  save_hmm(fit.model, out);
  finish(out, a.output);
  const std::string vpath = a.vocab_out.empty() ? a.output + ".vocab" : a.vocab_out;
  auto vout = open_output(vpath);
  write_vocabulary(vout, data.vocab);
  finish(vout, vpath);
  if (common.verbose) {
    log << "fit " << a.states << "-state HMM over " << data.vocab.size() << " items in " << fit.iterations
        << " iterations, log-likelihood " << format_double(fit.log_likelihood.back()) << '\n';
  }
}

void run_detect(const DetectArgs& a, const Common& common, std::ostream& sink, std::ostream& log) {
  const Detector kind = parse_detector(a.detector);
  ExperimentConfig cfg;
  cfg.seed = a.seed;
  cfg.score_mode = parse_score_mode(a.mode);
  cfg.max_changes = a.max_changes;
  cfg.detector_factors = a.factors;

  Dataset data;
  DetectorSetup setup;
  setup.kind = kind;
  double threshold = a.tau;
  if (kind == Detector::hmcd) {
    if (a.model.empty()) throw UsageError("detect --detector hmcd needs --model");
    auto [model, vocab] = load_model(a.model, vocab_path_for(a.vocab, a.model));
    data = load_interactions(a.input, &vocab);
    setup.hmm = std::move(model);
  } else {
    data = load_interactions(a.input);
    setup = prepare_detector(kind, data.sequences, data.vocab.size(), cfg);
    if (kind == Detector::cusum) {
      if (a.cusum_tau) {
        threshold = *a.cusum_tau;
      } else {
        double total = 0.0;
        for (const auto& s : data.sequences) total += cusum_total(*setup.factors, s);
        threshold = data.sequences.empty() ? 0.0 : total / static_cast<double>(data.sequences.size());
      }
    }
  }
  const auto cps = detect_all(setup, data.sequences, threshold, cfg);
  std::ostringstream out;
  out << "user_id,index,score\n";
  std::size_t rows = 0;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    write_change_points(out, data.sequences[i].user_id, cps[i]);
    rows += cps[i].size();
  }
  emit(a.output, out.str(), sink);
  if (common.verbose) log << "detected " << rows << " change points in " << cps.size() << " sequences\n";
}

std::vector<ChangePointSet> read_change_points(const std::string& path, const Dataset& data) {
  auto in = open_input(path);
  std::map<std::string, ChangePointSet> by_user;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    if (!header) {
      if (body != "user_id,index,score") throw ParseError("unexpected change-point header", lineno);
      header = true;
      continue;
    }
    const auto cols = split(body, ',');
    if (cols.size() != 3) throw ParseError("expected 3 columns", lineno);
    auto& set = by_user[std::string(trim(cols[0]))];
    const long long idx = parse_integer(cols[1], lineno);
    if (idx < 1) throw ParseError("change-point index must be >= 1", lineno);
    set.indices.push_back(static_cast<std::size_t>(idx));
    set.scores.push_back(parse_double(cols[2], lineno));
  }
  std::vector<ChangePointSet> out(data.sequences.size());
  for (std::size_t i = 0; i < data.sequences.size(); ++i) {
    const auto it = by_user.find(data.sequences[i].user_id);
    if (it != by_user.end()) out[i] = it->second;
  }
  return out;
}

void run_recommend(const RecommendArgs& a, const Common& common, std::ostream& sink, std::ostream& log) {
  const Method method = parse_method(a.method);
  if (a.l < 1) throw UsageError("-l must be >= 1");
  ExperimentConfig cfg;
  cfg.seed = a.seed;
  cfg.hmm_states = a.states;
  cfg.score_mode = parse_score_mode(a.mode);
  cfg.factors = a.factors;
  cfg.nmf_iters = a.nmf_iters;
  cfg.bpr.epochs = a.epochs;

  Dataset data;
  std::optional<HmmParams> model;
  if (!a.model.empty()) {
    auto [m, vocab] = load_model(a.model, vocab_path_for(a.vocab, a.model));
    data = load_interactions(a.input, &vocab);
    model = std::move(m);
  } else {
    data = load_interactions(a.input);
  }

  std::vector<ChangePointSet> cps;
  if (method == Method::smf) {
    if (!a.change_points.empty()) {
      cps = read_change_points(a.change_points, data);
    } else {
      const Detector kind = parse_detector(a.detector);
      DetectorSetup setup;
      if (kind == Detector::hmcd && model) {
        setup.kind = kind;
        setup.hmm = *model;
      } else {
        setup = prepare_detector(kind, data.sequences, data.vocab.size(), cfg);
      }
      double threshold = a.tau;
      if (kind == Detector::cusum) {
        double total = 0.0;
        for (const auto& s : data.sequences) total += cusum_total(*setup.factors, s);
        threshold = total / static_cast<double>(std::max<std::size_t>(1, data.sequences.size()));
      }
      cps = detect_all(setup, data.sequences, threshold, cfg);
    }
  }
  const auto recs = recommend_users(method, data.sequences, data.vocab.size(), a.l, cfg, cps, a.exclude_seen);
  std::ostringstream out;
  out << "user_id,rank,item_id,score\n";
  for (const auto& r : recs) {
    for (std::size_t k = 0; k < r.items.size(); ++k) {
      out << r.user_id << ',' << (k + 1) << ',' << data.vocab.id(r.items[k]) << ',' << format_double(r.scores[k])
          << '\n';
    }
  }
  emit(a.output, out.str(), sink);
  if (common.verbose) log << "wrote recommendations for " << recs.size() << " users\n";
}

void run_evaluate(const EvaluateArgs& a, const Common& common, std::ostream& sink, std::ostream& log) {
  ExperimentConfig cfg;
  cfg.methods = a.methods;
  cfg.detectors = a.detectors;
  cfg.cutoffs = a.k;
  cfg.ndcg_cutoffs = a.ndcg_k;
  cfg.holdout = a.holdout;
  cfg.hmm_states = a.states;
  cfg.tau = a.tau;
  cfg.tau_grid = a.tau_grid;
  cfg.score_mode = parse_score_mode(a.mode);
  cfg.factors = a.factors;
  cfg.nmf_iters = a.nmf_iters;
  cfg.bpr.epochs = a.epochs;
  cfg.seed = a.seed;

  const auto data = load_interactions(a.input);
  const auto report = run_experiment(data, cfg);
  std::ostringstream table;
  write_metric_table(table, report, a.percent);
  emit(a.output, table.str(), sink);
  if (data.labeled()) {
    std::ostringstream cp;
    write_detection_table(cp, report);
    if (!a.cp_output.empty()) {
      emit(a.cp_output, cp.str(), sink);
    } else if (to_stdout(a.output)) {
      sink << '\n' << cp.str();
    } else {
      emit(a.output + ".cp.csv", cp.str(), sink);
    }
  }
  if (common.verbose) {
    log << "evaluated " << report.methods.front().evaluated << " users (" << report.skipped_users
        << " skipped)\n";
  }
}

void add_env_names(CLI::App& app) {
  for (CLI::App* sub : app.get_subcommands({})) add_env_names(*sub);
  for (CLI::Option* opt : app.get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
    std::string env = "HMCD_" + opt->get_lnames().front();
    std::transform(env.begin(), env.end(), env.begin(), [](unsigned char c) {
      return c == '-' ? '_' : static_cast<char>(std::toupper(c));
    });
    opt->envname(env);
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"HMM change-point detection and sequence-aware recommendation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  Common common;
  app.add_option("--threads", common.threads, "OpenMP worker threads (0 = runtime default)");
  app.add_flag("-v,--verbose", common.verbose, "Progress messages on stderr");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate concatenated sequences with ground-truth change points");
  s->add_option("--planted", synth.planted, "Planted block-HMM pool: h=<states> m=<items> pool=<n> length=<T>")
      ->expected(1, 4);
  s->add_option("--pool", synth.pool, "Interaction file to draw source sequences from");
  s->add_option("--count", synth.count, "Number of sequences")->required();
  s->add_option("--seed", synth.seed);
  s->add_option("--min-window", synth.min_window);
  s->add_option("--max-window", synth.max_window);
  s->add_flag("--allow-same-source", synth.allow_same_source,
              "Planted pool: allow both windows to come from the same hidden state");
  s->add_option("-o,--output", synth.output, "Output file (default stdout)");

  FitArgs fit;
  auto* f = app.add_subcommand("fit-hmm", "Fit an HMM with Baum-Welch");
  f->add_option("-i,--input", fit.input)->required();
  f->add_option("--states", fit.states)->check(CLI::PositiveNumber);
  f->add_option("--max-iters", fit.max_iters)->check(CLI::PositiveNumber);
  f->add_option("--tol", fit.tol)->check(CLI::NonNegativeNumber);
  f->add_option("--smoothing", fit.smoothing)->check(CLI::NonNegativeNumber);
  f->add_option("--seed", fit.seed);
  f->add_option("-o,--output", fit.output)->required();
  f->add_option("--vocab-out", fit.vocab_out, "Vocabulary file (default <output>.vocab)");

  DetectArgs det;
  auto* d = app.add_subcommand("detect", "Detect change points");
  d->add_option("-i,--input", det.input)->required();
  d->add_option("--detector", det.detector)->check(CLI::IsMember(kDetectors));
  d->add_option("--model", det.model, "HMM model file (hmcd)");
  d->add_option("--vocab", det.vocab, "Vocabulary file (default <model>.vocab)");
  d->add_option("--tau", det.tau)->check(CLI::NonNegativeNumber);
  d->add_option("--mode", det.mode)->check(CLI::IsMember(kModes));
  d->add_option("--max-changes", det.max_changes);
  d->add_option("--cusum-tau", det.cusum_tau, "CUSUM threshold (default: mean cumulative sum)");
  d->add_option("--factors", det.factors, "Latent factors for cusum/sw distances")->check(CLI::PositiveNumber);
  d->add_option("--seed", det.seed);
  d->add_option("-o,--output", det.output, "Output file (default stdout)");

  RecommendArgs rec;
  auto* r = app.add_subcommand("recommend", "Produce top-l recommendation lists");
  r->add_option("-i,--input", rec.input)->required();
  r->add_option("--method", rec.method)->required()->check(CLI::IsMember(kMethods));
  r->add_option("-l,--length", rec.l)->check(CLI::PositiveNumber);
  r->add_option("--detector", rec.detector)->check(CLI::IsMember(kDetectors));
  r->add_option("--change-points", rec.change_points, "Change-point table from `detect` (smf)");
  r->add_option("--model", rec.model);
  r->add_option("--vocab", rec.vocab);
  r->add_option("--states", rec.states)->check(CLI::PositiveNumber);
  r->add_option("--tau", rec.tau)->check(CLI::NonNegativeNumber);
  r->add_option("--mode", rec.mode)->check(CLI::IsMember(kModes));
  r->add_option("--factors", rec.factors)->check(CLI::PositiveNumber);
  r->add_option("--nmf-iters", rec.nmf_iters)->check(CLI::PositiveNumber);
  r->add_option("--epochs", rec.epochs)->check(CLI::NonNegativeNumber);
  r->add_option("--seed", rec.seed);
  r->add_flag("--exclude-seen", rec.exclude_seen, "Drop items the user already interacted with");
  r->add_option("-o,--output", rec.output, "Output file (default stdout)");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Holdout evaluation and change-point error report");
  e->add_option("-i,--input", ev.input)->required();
  e->add_option("--method", ev.methods)->delimiter(',')->check(CLI::IsMember(kMethods));
  e->add_option("--detector", ev.detectors)->delimiter(',')->check(CLI::IsMember(kDetectors));
  e->add_option("--k", ev.k)->delimiter(',')->check(CLI::PositiveNumber);
  e->add_option("--ndcg-k", ev.ndcg_k)->delimiter(',')->check(CLI::PositiveNumber);
  e->add_option("--holdout", ev.holdout)->check(CLI::PositiveNumber);
  e->add_option("--states", ev.states)->check(CLI::PositiveNumber);
  e->add_option("--tau", ev.tau)->check(CLI::NonNegativeNumber);
  e->add_option("--tau-grid", ev.tau_grid)->delimiter(',');
  e->add_option("--mode", ev.mode)->check(CLI::IsMember(kModes));
  e->add_option("--factors", ev.factors)->check(CLI::PositiveNumber);
  e->add_option("--nmf-iters", ev.nmf_iters)->check(CLI::PositiveNumber);
  e->add_option("--epochs", ev.epochs)->check(CLI::NonNegativeNumber);
  e->add_option("--seed", ev.seed);
  e->add_flag("--percent", ev.percent, "Report percentages instead of fractions");
  e->add_option("-o,--output", ev.output, "Output file (default stdout)");
  e->add_option("--cp-output", ev.cp_output, "Change-point error table (default <output>.cp.csv)");

  add_env_names(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    set_worker_threads(common.threads);
    std::string output;
    const CLI::App* sub = nullptr;
    if (s->parsed()) {
      run_synth(synth, common, out, err);
      output = synth.output;
      sub = s;
    } else if (f->parsed()) {
      run_fit(fit, common, err);
      output = fit.output;
      sub = f;
    } else if (d->parsed()) {
      run_detect(det, common, out, err);
      output = det.output;
      sub = d;
    } else if (r->parsed()) {
      run_recommend(rec, common, out, err);
      output = rec.output;
      sub = r;
    } else if (e->parsed()) {
      run_evaluate(ev, common, out, err);
      output = ev.output;
      sub = e;
    }
    if (sub != nullptr && !to_stdout(output)) write_run_config(app, *sub, output);
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << "\n" << app.help();
    return kUsageError;
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << '\n';
    return kUsageError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kRuntimeFailure;
  }
  return kSuccess;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"hmcd"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace hmcd::cli
