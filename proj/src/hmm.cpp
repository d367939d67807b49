#include "hmcd/hmm.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <string>

#include "hmcd/errors.hpp"
#include "hmcd/text_format.hpp"

namespace hmcd {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_items(const HmmParams& model, const InteractionSequence& seq) {
  for (const ItemIndex y : seq.items) {
    if (y >= model.num_items) {
      throw VocabularyError("item index " + std::to_string(y) + " outside vocabulary of size " +
                            std::to_string(model.num_items));
    }
  }
}

void normalize_row(std::span<double> row) {
  double s = 0.0;
  for (double v : row) s += v;
  if (s > 0.0) {
    for (double& v : row) v /= s;
  } else {
    for (double& v : row) v = 1.0 / static_cast<double>(row.size());
  }
}

void check_distribution(std::span<const double> row, double tol, const char* what) {
  double s = 0.0;
  for (double v : row) {
    if (!(v >= 0.0)) throw InvalidParameterError(std::string(what) + " has a negative entry");
    s += v;
  }
  if (std::abs(s - 1.0) > tol) {
    throw InvalidParameterError(std::string(what) + " does not sum to 1");
  }
}

HmmParams maximize(const kernels::ExpectedCounts& counts, const HmmParams& prev, double eps) {
  HmmParams next = prev;
  for (std::size_t i = 0; i < prev.num_states; ++i) next.pi[i] = counts.initial[i] + eps;
  normalize_row(next.pi);
  for (std::size_t i = 0; i < prev.num_states; ++i) {
    auto row = next.trans.row(i);
    for (std::size_t j = 0; j < prev.num_states; ++j) row[j] = counts.transitions(i, j) + eps;
    normalize_row(row);
    auto erow = next.emis.row(i);
    for (std::size_t k = 0; k < prev.num_items; ++k) erow[k] = counts.emissions(i, k) + eps;
    normalize_row(erow);
  }
  return next;
}

kernels::ExpectedCounts e_step(const HmmParams& model, std::span<const InteractionSequence> seqs,
                               Execution exec) {
  return exec == Execution::serial ? kernels::expected_counts_serial(model, seqs)
                                   : kernels::expected_counts_omp(model, seqs);
}

void write_row(std::ostream& out, std::span<const double> row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ' ';
    out << format_double(row[i]);
  }
  out << '\n';
}

struct TokenReader {
  std::istream& in;

  std::string next(const char* what) {
    std::string tok;
    if (!(in >> tok)) throw ParseError(std::string("unexpected end of model, expected ") + what, 0);
    return tok;
  }
  void expect(const char* keyword) {
    const auto tok = next(keyword);
    if (tok != keyword) throw ParseError("expected '" + std::string(keyword) + "', got '" + tok + "'", 0);
  }
  unsigned long long integer(const char* what) {
    const auto v = parse_integer(next(what));
    if (v < 0) throw ParseError(std::string(what) + " must be non-negative", 0);
    return static_cast<unsigned long long>(v);
  }
  void values(std::span<double> out_values, const char* what) {
    for (double& v : out_values) v = parse_double(next(what));
  }
};

}  // namespace

void validate(const HmmParams& model, double tol) {
  if (model.num_states < 1 || model.num_items < 1) {
    throw InvalidParameterError("model needs at least one state and one item");
  }
  if (model.pi.size() != model.num_states || model.trans.rows() != model.num_states ||
      model.trans.cols() != model.num_states || model.emis.rows() != model.num_states ||
      model.emis.cols() != model.num_items) {
    throw InvalidParameterError("model dimensions are inconsistent");
  }
  check_distribution(model.pi, tol, "pi");
  for (std::size_t i = 0; i < model.num_states; ++i) {
    check_distribution(model.trans.row(i), tol, "transition row");
    check_distribution(model.emis.row(i), tol, "emission row");
  }
}

HmmParams random_hmm(std::size_t num_states, std::size_t num_items, std::uint64_t seed) {
  if (num_states < 1 || num_items < 1) {
    throw InvalidParameterError("num_states and num_items must be >= 1");
  }
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&] { return 1.0 - unit(gen); };  // (0, 1]

  HmmParams m;
  m.num_states = num_states;
  m.num_items = num_items;
  m.seed = seed;
  m.pi.resize(num_states);
  for (double& v : m.pi) v = draw();
  normalize_row(m.pi);
  m.trans = Matrix(num_states, num_states);
  for (std::size_t i = 0; i < num_states; ++i) {
    for (double& v : m.trans.row(i)) v = draw();
    normalize_row(m.trans.row(i));
  }
  m.emis = Matrix(num_states, num_items);
  for (std::size_t i = 0; i < num_states; ++i) {
    for (double& v : m.emis.row(i)) v = draw();
    normalize_row(m.emis.row(i));
  }
  return m;
}

double forward_log_likelihood(const HmmParams& model, const InteractionSequence& seq) {
  check_items(model, seq);
  const std::size_t h = model.num_states;
  std::vector<double> alpha(h), next(h);
  double ll = 0.0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const ItemIndex y = seq.items[t];
    double c = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      double v = 0.0;
      if (t == 0) {
        v = model.pi[j];
      } else {
        for (std::size_t i = 0; i < h; ++i) v += alpha[i] * model.trans(i, j);
      }
      next[j] = v * model.emis(j, y);
      c += next[j];
    }
    if (!(c > 0.0)) return kNegInf;
    for (std::size_t j = 0; j < h; ++j) alpha[j] = next[j] / c;
    ll += std::log(c);
  }
  return ll;
}

ViterbiResult viterbi_decode(const HmmParams& model, const InteractionSequence& seq) {
  if (seq.empty()) throw EmptyInputError("viterbi_decode: empty sequence");
  check_items(model, seq);
  const std::size_t h = model.num_states;
  const std::size_t T = seq.size();

  Matrix log_trans(h, h);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < h; ++j) log_trans(i, j) = std::log(model.trans(i, j));
  }

  std::vector<double> delta(h), next(h);
  std::vector<std::size_t> back(T * h, 0);
  for (std::size_t j = 0; j < h; ++j) {
    delta[j] = std::log(model.pi[j]) + std::log(model.emis(j, seq.items[0]));
  }
  for (std::size_t t = 1; t < T; ++t) {
    const ItemIndex y = seq.items[t];
    for (std::size_t j = 0; j < h; ++j) {
      double best = kNegInf;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < h; ++i) {
        const double v = delta[i] + log_trans(i, j);
        if (v > best) {
          best = v;
          arg = i;
        }
      }
      back[t * h + j] = arg;
      next[j] = best + std::log(model.emis(j, y));
    }
    delta.swap(next);
  }

  ViterbiResult r;
  r.path.assign(T, 0);
  double best = kNegInf;
  for (std::size_t j = 0; j < h; ++j) {
    if (delta[j] > best) {
      best = delta[j];
      r.path[T - 1] = j;
    }
  }
  for (std::size_t t = T - 1; t > 0; --t) r.path[t - 1] = back[t * h + r.path[t]];

  r.step_scores.resize(T);
  r.log_prob = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t v = r.path[t];
    const double move = t == 0 ? model.pi[v] : model.trans(r.path[t - 1], v);
    r.step_scores[t] = move * model.emis(v, seq.items[t]);
    r.log_prob += std::log(r.step_scores[t]);
  }
  return r;
}

FitResult fit_hmm(std::span<const InteractionSequence> seqs, std::size_t num_states,
                  std::size_t num_items, const FitConfig& config) {
  if (num_states < 1 || num_items < 1) {
    throw InvalidParameterError("baum_welch_fit: h and m must be >= 1");
  }
  if (config.max_iters < 1 || config.smoothing < 0.0 || config.ll_tolerance < 0.0) {
    throw InvalidParameterError("baum_welch_fit: invalid FitConfig");
  }
  bool any = false;
  for (const auto& s : seqs) {
    if (!s.empty()) any = true;
    for (const ItemIndex y : s.items) {
      if (y >= num_items) {
        throw VocabularyError("item index " + std::to_string(y) + " outside vocabulary of size " +
                              std::to_string(num_items));
      }
    }
  }
  if (!any) throw EmptyInputError("baum_welch_fit: all sequences are empty");

  FitResult result;
  result.model = random_hmm(num_states, num_items, config.seed);
  double prev = kNegInf;
  bool converged = false;
  for (int it = 0; it < config.max_iters; ++it) {
    const auto counts = e_step(result.model, seqs, config.execution);
    result.log_likelihood.push_back(counts.log_likelihood);
    if (it > 0 && counts.log_likelihood - prev < config.ll_tolerance * std::abs(prev)) {
      converged = true;
      break;
    }
    prev = counts.log_likelihood;
    result.model = maximize(counts, result.model, config.smoothing);
    ++result.iterations;
  }
  if (!converged) {
    result.log_likelihood.push_back(e_step(result.model, seqs, config.execution).log_likelihood);
  }
  return result;
}

void save_hmm(const HmmParams& model, std::ostream& out) {
  out << "hmcd-hmm 1\n";
  out << "num_states " << model.num_states << '\n';
  out << "num_items " << model.num_items << '\n';
  out << "seed " << model.seed << '\n';
  out << "pi\n";
  write_row(out, model.pi);
  out << "trans\n";
  for (std::size_t i = 0; i < model.num_states; ++i) write_row(out, model.trans.row(i));
  out << "emis\n";
  for (std::size_t i = 0; i < model.num_states; ++i) write_row(out, model.emis.row(i));
}

HmmParams load_hmm(std::istream& in) {
  TokenReader r{in};
  r.expect("hmcd-hmm");
  if (r.next("version") != "1") throw ParseError("unsupported model version", 0);
  HmmParams m;
  r.expect("num_states");
  m.num_states = r.integer("num_states");
  r.expect("num_items");
  m.num_items = r.integer("num_items");
  r.expect("seed");
  m.seed = parse_unsigned(r.next("seed"));
  if (m.num_states < 1 || m.num_items < 1) throw ParseError("empty model dimensions", 0);
  m.pi.resize(m.num_states);
  m.trans = Matrix(m.num_states, m.num_states);
  m.emis = Matrix(m.num_states, m.num_items);
  r.expect("pi");
  r.values(m.pi, "pi");
  r.expect("trans");
  r.values(m.trans.values(), "trans");
  r.expect("emis");
  r.values(m.emis.values(), "emis");
  try {
    validate(m);
  } catch (const InvalidParameterError& e) {
    throw ParseError(std::string("invalid model: ") + e.what(), 0);
  }
  return m;
}

}  // namespace hmcd
