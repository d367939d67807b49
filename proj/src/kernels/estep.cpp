#include <cmath>
#include <limits>

#include "hmcd/hmm.hpp"

namespace hmcd::kernels {
namespace {

// Posterior statistics of a single sequence under the scaled forward-backward recursion.
struct SequencePosterior {
  std::vector<double> gamma;  // T x h, row-major
  Matrix xi;                  // h x h, summed over t
  double log_likelihood = 0.0;
  bool valid = true;
};

void posterior(const HmmParams& model, const InteractionSequence& seq, SequencePosterior& out,
               std::vector<double>& alpha, std::vector<double>& beta, std::vector<double>& scale) {
  const std::size_t h = model.num_states;
  const std::size_t T = seq.size();
  out.log_likelihood = 0.0;
  out.valid = true;
  out.gamma.assign(T * h, 0.0);
  if (out.xi.rows() != h) out.xi = Matrix(h, h);
  std::fill(out.xi.values().begin(), out.xi.values().end(), 0.0);
  if (T == 0) return;

  alpha.assign(T * h, 0.0);
  beta.assign(T * h, 0.0);
  scale.assign(T, 0.0);

  for (std::size_t t = 0; t < T; ++t) {
    const ItemIndex y = seq.items[t];
    double* a = alpha.data() + t * h;
    double c = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      double v;
      if (t == 0) {
        v = model.pi[j];
      } else {
        const double* prev = alpha.data() + (t - 1) * h;
        v = 0.0;
        for (std::size_t i = 0; i < h; ++i) v += prev[i] * model.trans(i, j);
      }
      a[j] = v * model.emis(j, y);
      c += a[j];
    }
    if (!(c > 0.0)) {
      out.valid = false;
      out.log_likelihood = -std::numeric_limits<double>::infinity();
      return;
    }
    for (std::size_t j = 0; j < h; ++j) a[j] /= c;
    scale[t] = c;
    out.log_likelihood += std::log(c);
  }

  double* last = beta.data() + (T - 1) * h;
  for (std::size_t i = 0; i < h; ++i) last[i] = 1.0;
  for (std::size_t t = T - 1; t-- > 0;) {
    const ItemIndex y = seq.items[t + 1];
    const double* next = beta.data() + (t + 1) * h;
    double* b = beta.data() + t * h;
    for (std::size_t i = 0; i < h; ++i) {
      double v = 0.0;
      for (std::size_t j = 0; j < h; ++j) v += model.trans(i, j) * model.emis(j, y) * next[j];
      b[i] = v / scale[t + 1];
    }
  }

  for (std::size_t t = 0; t < T; ++t) {
    const double* a = alpha.data() + t * h;
    const double* b = beta.data() + t * h;
    double* g = out.gamma.data() + t * h;
    double norm = 0.0;
    for (std::size_t i = 0; i < h; ++i) {
      g[i] = a[i] * b[i];
      norm += g[i];
    }
    for (std::size_t i = 0; i < h; ++i) g[i] /= norm;
  }

  for (std::size_t t = 0; t + 1 < T; ++t) {
    const ItemIndex y = seq.items[t + 1];
    const double* a = alpha.data() + t * h;
    const double* next = beta.data() + (t + 1) * h;
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < h; ++j) {
        out.xi(i, j) += a[i] * model.trans(i, j) * model.emis(j, y) * next[j] / scale[t + 1];
      }
    }
  }
}

ExpectedCounts zero_counts(const HmmParams& model) {
  ExpectedCounts c;
  c.initial.assign(model.num_states, 0.0);
  c.transitions = Matrix(model.num_states, model.num_states);
  c.emissions = Matrix(model.num_states, model.num_items);
  return c;
}

void accumulate(ExpectedCounts& acc, const InteractionSequence& seq, const SequencePosterior& p,
                std::size_t h) {
  acc.log_likelihood += p.log_likelihood;
  if (!p.valid || seq.empty()) return;
  for (std::size_t i = 0; i < h; ++i) acc.initial[i] += p.gamma[i];
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < h; ++j) acc.transitions(i, j) += p.xi(i, j);
  }
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const double* g = p.gamma.data() + t * h;
    for (std::size_t i = 0; i < h; ++i) acc.emissions(i, seq.items[t]) += g[i];
  }
}

}  // namespace

ExpectedCounts expected_counts_serial(const HmmParams& model,
                                      std::span<const InteractionSequence> seqs) {
  ExpectedCounts acc = zero_counts(model);
  SequencePosterior p;
  std::vector<double> alpha, beta, scale;
  for (const auto& seq : seqs) {
    posterior(model, seq, p, alpha, beta, scale);
    accumulate(acc, seq, p, model.num_states);
  }
  return acc;
}

ExpectedCounts expected_counts_omp(const HmmParams& model,
                                   std::span<const InteractionSequence> seqs) {
  std::vector<SequencePosterior> posts(seqs.size());
  const auto n = static_cast<std::ptrdiff_t>(seqs.size());
#pragma omp parallel
  {
    std::vector<double> alpha, beta, scale;
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t s = 0; s < n; ++s) {
      posterior(model, seqs[s], posts[s], alpha, beta, scale);
    }
  }
  ExpectedCounts acc = zero_counts(model);
  for (std::size_t s = 0; s < seqs.size(); ++s) accumulate(acc, seqs[s], posts[s], model.num_states);
  return acc;
}

}  // namespace hmcd::kernels
