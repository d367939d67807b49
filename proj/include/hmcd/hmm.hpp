#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "hmcd/matrix.hpp"
#include "hmcd/parallel.hpp"
#include "hmcd/sequence.hpp"

namespace hmcd {

// Discrete-observation HMM over `num_states` hidden states and `num_items`
// observable items. Rows of `trans` and `emis` are probability vectors.
struct HmmParams {
  std::size_t num_states = 0;
  std::size_t num_items = 0;
  std::vector<double> pi;
  Matrix trans;  // num_states x num_states
  Matrix emis;   // num_states x num_items
  std::uint64_t seed = 0;

  friend bool operator==(const HmmParams&, const HmmParams&) = default;
};

struct FitConfig {
  int max_iters = 100;
  // Stop when (ll_new - ll_old) / |ll_old| drops below this.
  double ll_tolerance = 1e-5;
  std::uint64_t seed = 0;
  // Pseudo-count added to every initial, transition and emission count.
  double smoothing = 1e-6;
  Execution execution = Execution::parallel;
};

struct ViterbiResult {
  std::vector<std::size_t> path;
  double log_prob = 0.0;
  // step_scores[0] = pi(v0) * B(v0, y0); step_scores[t] = A(v_{t-1}, v_t) * B(v_t, y_t).
  std::vector<double> step_scores;
};

struct FitResult {
  HmmParams model;
  // Corpus log-likelihood evaluated at the start of each iteration, plus the
  // log-likelihood of the returned model as the final entry.
  std::vector<double> log_likelihood;
  int iterations = 0;
};

// Throws InvalidParameterError unless all stochastic invariants hold within `tol`.
void validate(const HmmParams& model, double tol = 1e-9);

// log P(items | model) via the scaled forward recursion. Empty sequence -> 0,
// zero-probability sequence -> -inf.
double forward_log_likelihood(const HmmParams& model, const InteractionSequence& seq);

// Most probable state path, computed in log space. Ties go to the lowest state index.
ViterbiResult viterbi_decode(const HmmParams& model, const InteractionSequence& seq);

// Multi-sequence Baum-Welch (EM) from a seeded random start.
FitResult fit_hmm(std::span<const InteractionSequence> seqs, std::size_t num_states,
                  std::size_t num_items, const FitConfig& config);

inline HmmParams baum_welch_fit(std::span<const InteractionSequence> seqs, std::size_t num_states,
                                std::size_t num_items, const FitConfig& config) {
  return fit_hmm(seqs, num_states, num_items, config).model;
}

// Seeded random stochastic parameters (uniform positive draws, row-normalized).
HmmParams random_hmm(std::size_t num_states, std::size_t num_items, std::uint64_t seed);

// Text model format:
//
//   hmcd-hmm 1
//   num_states <h>
//   num_items <m>
//   seed <s>
//   pi
//   <h values>
//   trans
//   <h rows of h values>
//   emis
//   <h rows of m values>
//
// Values use the shortest round-trip representation, so load -> save is bit-exact.
void save_hmm(const HmmParams& model, std::ostream& out);
HmmParams load_hmm(std::istream& in);

namespace kernels {

// Pooled expected sufficient statistics of one E-step.
struct ExpectedCounts {
  std::vector<double> initial;  // h
  Matrix transitions;           // h x h
  Matrix emissions;             // h x m
  double log_likelihood = 0.0;
};

// Serial reference E-step: sequences are processed and accumulated in order.
ExpectedCounts expected_counts_serial(const HmmParams& model,
                                      std::span<const InteractionSequence> seqs);

// OpenMP E-step: per-sequence posteriors are computed in parallel, then
// accumulated in sequence order. Bit-identical to the serial version.
ExpectedCounts expected_counts_omp(const HmmParams& model,
                                   std::span<const InteractionSequence> seqs);

}  // namespace kernels

}  // namespace hmcd
