#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hmcd/matrix.hpp"
#include "hmcd/parallel.hpp"
#include "hmcd/ranking.hpp"
#include "hmcd/sequence.hpp"

namespace hmcd {

// Compressed sparse row matrix with non-negative values.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<ItemIndex> col_idx;  // ascending within a row
  std::vector<double> values;

  static SparseMatrix from_dense(const Matrix& dense);
  SparseMatrix transposed() const;
  Matrix to_dense() const;
  std::size_t nnz() const noexcept { return col_idx.size(); }
};

// One binary row per (user, segment). `items` holds the distinct items of the
// segment in ascending order, i.e. the nonzero columns of the incidence row.
struct SegmentRow {
  std::string user_id;
  std::size_t segment_index = 0;
  std::vector<ItemIndex> items;
};

struct SegmentedMatrix {
  std::vector<SegmentRow> rows;
  std::size_t num_items = 0;

  std::vector<double> dense_row(std::size_t r) const;
  SparseMatrix to_sparse() const;
};

struct FactorModel {
  Matrix p;  // rows x rank
  Matrix q;  // items x rank
  std::size_t rank = 0;
  std::uint64_t seed = 0;
  std::vector<double> loss_history;  // ||M - p q^T||_F^2 after each iteration

  friend bool operator==(const FactorModel&, const FactorModel&) = default;
};

struct NmfConfig {
  std::size_t rank = 40;
  int iters = 200;
  std::uint64_t seed = 0;
  Execution execution = Execution::parallel;
  // Multiplicative updates of each factor per iteration; all of them reuse the
  // products with M computed at the start of the iteration.
  int inner_updates = 10;
};

// segments_per_user[u] holds user u's consecutive segments.
SegmentedMatrix build_segmented_matrix(std::span<const std::vector<InteractionSequence>> segments_per_user,
                                       std::size_t num_items);

// Lee-Seung multiplicative updates for the squared Frobenius objective.
FactorModel nmf_fit(const SparseMatrix& m, const NmfConfig& config);
FactorModel nmf_fit(const SegmentedMatrix& m, std::size_t rank, int iters, std::uint64_t seed,
                    Execution exec = Execution::parallel);

// Non-negative least-squares profile for v against fixed item factors q.
std::vector<double> fold_in(const Matrix& q, std::span<const double> v, int iters);
// Same, for a binary profile given by its item list.
std::vector<double> fold_in(const Matrix& q, std::span<const ItemIndex> items, int iters);

// Ranks items by p_u . q_j.
Recommendation smf_recommend(std::span<const double> p_u, const FactorModel& model, std::size_t l,
                             std::span<const ItemIndex> exclude);

// Text format mirroring the HMM model file ("hmcd-factors 1" header).
void save_factors(const FactorModel& model, std::ostream& out);
FactorModel load_factors(std::istream& in);

namespace kernels {

// One iteration: `inner_updates` multiplicative updates of q, then of p.
// Returns the objective after the update. `mt` must be the transpose of `m`.
double nmf_iteration_serial(const SparseMatrix& m, const SparseMatrix& mt, Matrix& p, Matrix& q,
                            int inner_updates = 1);
// OpenMP version. Every output element is accumulated in the same order as the
// serial version, so results are bit-identical.
double nmf_iteration_omp(const SparseMatrix& m, const SparseMatrix& mt, Matrix& p, Matrix& q,
                         int inner_updates = 1);

}  // namespace kernels

}  // namespace hmcd
