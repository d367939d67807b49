#include "hmcd/factorization.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include "hmcd/errors.hpp"
#include "hmcd/text_format.hpp"

namespace hmcd {

SparseMatrix SparseMatrix::from_dense(const Matrix& dense) {
  SparseMatrix s;
  s.rows = dense.rows();
  s.cols = dense.cols();
  for (std::size_t r = 0; r < dense.rows(); ++r) {
    for (std::size_t c = 0; c < dense.cols(); ++c) {
      if (dense(r, c) != 0.0) {
        s.col_idx.push_back(static_cast<ItemIndex>(c));
        s.values.push_back(dense(r, c));
      }
    }
    s.row_ptr.push_back(s.col_idx.size());
  }
  return s;
}

SparseMatrix SparseMatrix::transposed() const {
  SparseMatrix t;
  t.rows = cols;
  t.cols = rows;
  std::vector<std::size_t> count(cols + 1, 0);
  for (const ItemIndex c : col_idx) ++count[c + 1];
  for (std::size_t c = 0; c < cols; ++c) count[c + 1] += count[c];
  t.row_ptr = count;
  t.col_idx.resize(nnz());
  t.values.resize(nnz());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) {
      const std::size_t dst = count[col_idx[e]]++;
      t.col_idx[dst] = static_cast<ItemIndex>(r);
      t.values[dst] = values[e];
    }
  }
  return t;
}

Matrix SparseMatrix::to_dense() const {
  Matrix d(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) d(r, col_idx[e]) = values[e];
  }
  return d;
}

std::vector<double> SegmentedMatrix::dense_row(std::size_t r) const {
  std::vector<double> v(num_items, 0.0);
  for (const ItemIndex i : rows.at(r).items) v[i] = 1.0;
  return v;
}

SparseMatrix SegmentedMatrix::to_sparse() const {
  SparseMatrix s;
  s.rows = rows.size();
  s.cols = num_items;
  for (const auto& row : rows) {
    for (const ItemIndex i : row.items) {
      s.col_idx.push_back(i);
      s.values.push_back(1.0);
    }
    s.row_ptr.push_back(s.col_idx.size());
  }
  return s;
}

SegmentedMatrix build_segmented_matrix(std::span<const std::vector<InteractionSequence>> segments_per_user,
                                       std::size_t num_items) {
  SegmentedMatrix m;
  m.num_items = num_items;
  for (const auto& segments : segments_per_user) {
    for (std::size_t k = 0; k < segments.size(); ++k) {
      const auto& seg = segments[k];
      if (seg.empty()) throw InvalidSegmentError("empty segment for user '" + seg.user_id + "'");
      SegmentRow row{seg.user_id, k, seg.items};
      for (const ItemIndex i : row.items) {
        if (i >= num_items) throw VocabularyError("item index " + std::to_string(i) + " outside vocabulary");
      }
      std::sort(row.items.begin(), row.items.end());
      row.items.erase(std::unique(row.items.begin(), row.items.end()), row.items.end());
      m.rows.push_back(std::move(row));
    }
  }
  return m;
}

FactorModel nmf_fit(const SparseMatrix& m, const NmfConfig& config) {
  if (config.rank < 1) throw InvalidParameterError("nmf_fit: rank must be >= 1");
  if (config.iters < 1) throw InvalidParameterError("nmf_fit: iters must be >= 1");
  if (config.inner_updates < 1) throw InvalidParameterError("nmf_fit: inner_updates must be >= 1");
  if (m.rows == 0 || m.cols == 0) throw EmptyInputError("nmf_fit: empty matrix");
  for (const double v : m.values) {
    if (!(v >= 0.0)) throw InvalidParameterError("nmf_fit: matrix has negative entries");
  }

  double total = 0.0;
  for (const double v : m.values) total += v;
  const double mean = total / (static_cast<double>(m.rows) * static_cast<double>(m.cols));
  // Draws average 0.5, so the initial product averages roughly `mean`.
  const double scale = 2.0 * std::sqrt(std::max(mean, 1e-12) / static_cast<double>(config.rank));

  FactorModel model;
  model.rank = config.rank;
  model.seed = config.seed;
  model.p = Matrix(m.rows, config.rank);
  model.q = Matrix(m.cols, config.rank);
  std::mt19937_64 gen(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double& v : model.p.values()) v = (1.0 - unit(gen)) * scale;
  for (double& v : model.q.values()) v = (1.0 - unit(gen)) * scale;

  const SparseMatrix mt = m.transposed();
  model.loss_history.reserve(static_cast<std::size_t>(config.iters));
  for (int it = 0; it < config.iters; ++it) {
    const double loss = config.execution == Execution::serial
                            ? kernels::nmf_iteration_serial(m, mt, model.p, model.q, config.inner_updates)
                            : kernels::nmf_iteration_omp(m, mt, model.p, model.q, config.inner_updates);
    model.loss_history.push_back(loss);
  }
  return model;
}

FactorModel nmf_fit(const SegmentedMatrix& m, std::size_t rank, int iters, std::uint64_t seed,
                    Execution exec) {
  return nmf_fit(m.to_sparse(), NmfConfig{rank, iters, seed, exec});
}

// Start point for fold-in: the unconstrained least-squares solution of
// gq p = num with non-positive coordinates lifted to a small positive floor
// (multiplicative steps cannot move a coordinate away from zero). Falls back to
// all ones when the system is singular or has no positive coordinate.
static std::vector<double> clipped_least_squares(const Matrix& gq, std::span<const double> num) {
  const std::size_t f = num.size();
  Matrix a = gq;
  std::vector<double> x(num.begin(), num.end());
  double trace = 0.0;
  for (std::size_t k = 0; k < f; ++k) trace += a(k, k);
  for (std::size_t k = 0; k < f; ++k) a(k, k) += 1e-12 * trace / static_cast<double>(f);
  for (std::size_t c = 0; c < f; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < f; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    if (!(std::abs(a(piv, c)) > 0.0)) return std::vector<double>(f, 1.0);
    if (piv != c) {
      for (std::size_t k = 0; k < f; ++k) std::swap(a(c, k), a(piv, k));
      std::swap(x[c], x[piv]);
    }
    for (std::size_t r = c + 1; r < f; ++r) {
      const double factor = a(r, c) / a(c, c);
      if (factor == 0.0) continue;
      for (std::size_t k = c; k < f; ++k) a(r, k) -= factor * a(c, k);
      x[r] -= factor * x[c];
    }
  }
  for (std::size_t c = f; c-- > 0;) {
    double s = x[c];
    for (std::size_t k = c + 1; k < f; ++k) s -= a(c, k) * x[k];
    x[c] = s / a(c, c);
  }
  double top = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) return std::vector<double>(f, 1.0);
    top = std::max(top, v);
  }
  if (!(top > 0.0)) return std::vector<double>(f, 1.0);
  for (double& v : x) v = std::max(v, 1e-3 * top);
  return x;
}

std::vector<double> fold_in(const Matrix& q, std::span<const double> v, int iters) {
  if (v.size() != q.rows()) throw InvalidParameterError("fold_in: profile length differs from item count");
  if (iters < 1) throw InvalidParameterError("fold_in: iters must be >= 1");
  if (std::none_of(v.begin(), v.end(), [](double x) { return x != 0.0; })) {
    throw InvalidSegmentError("fold_in: all-zero profile");
  }
  const std::size_t f = q.cols();
  Matrix gq(f, f);
  for (std::size_t j = 0; j < q.rows(); ++j) {
    for (std::size_t a = 0; a < f; ++a) {
      for (std::size_t b = 0; b < f; ++b) gq(a, b) += q(j, a) * q(j, b);
    }
  }
  std::vector<double> num(f, 0.0);
  for (std::size_t j = 0; j < q.rows(); ++j) {
    if (v[j] == 0.0) continue;
    for (std::size_t k = 0; k < f; ++k) num[k] += v[j] * q(j, k);
  }

  std::vector<double> p = clipped_least_squares(gq, num), den(f);
  for (int it = 0; it < iters; ++it) {
    for (std::size_t k = 0; k < f; ++k) {
      double s = 0.0;
      for (std::size_t a = 0; a < f; ++a) s += p[a] * gq(a, k);
      den[k] = s;
    }
    for (std::size_t k = 0; k < f; ++k) p[k] *= num[k] / std::max(den[k], 1e-12);
  }
  return p;
}

std::vector<double> fold_in(const Matrix& q, std::span<const ItemIndex> items, int iters) {
  std::vector<double> v(q.rows(), 0.0);
  for (const ItemIndex i : items) {
    if (i >= q.rows()) throw VocabularyError("fold_in: item index outside factor vocabulary");
    v[i] = 1.0;
  }
  return fold_in(q, v, iters);
}

Recommendation smf_recommend(std::span<const double> p_u, const FactorModel& model, std::size_t l,
                             std::span<const ItemIndex> exclude) {
  if (l < 1) throw InvalidParameterError("smf_recommend: l must be >= 1");
  if (p_u.size() != model.q.cols()) throw InvalidParameterError("smf_recommend: factor dimension mismatch");
  std::vector<double> scores(model.q.rows());
  for (std::size_t j = 0; j < scores.size(); ++j) scores[j] = dot(p_u, model.q.row(j));
  return top_l(scores, l, exclude);
}

namespace {

void write_matrix(std::ostream& out, const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ' ';
      out << format_double(row[c]);
    }
    out << '\n';
  }
}

std::string next_token(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw ParseError("unexpected end of factor model", 0);
  return tok;
}

void expect(std::istream& in, const char* keyword) {
  const auto tok = next_token(in);
  if (tok != keyword) throw ParseError("expected '" + std::string(keyword) + "', got '" + tok + "'", 0);
}

std::size_t read_count(std::istream& in, const char* keyword) {
  expect(in, keyword);
  const auto v = parse_integer(next_token(in));
  if (v < 0) throw ParseError(std::string(keyword) + " must be non-negative", 0);
  return static_cast<std::size_t>(v);
}

}  // namespace

void save_factors(const FactorModel& model, std::ostream& out) {
  out << "hmcd-factors 1\n";
  out << "rank " << model.rank << '\n';
  out << "num_rows " << model.p.rows() << '\n';
  out << "num_items " << model.q.rows() << '\n';
  out << "seed " << model.seed << '\n';
  out << "p\n";
  write_matrix(out, model.p);
  out << "q\n";
  write_matrix(out, model.q);
  out << "loss_history " << model.loss_history.size() << '\n';
  for (std::size_t i = 0; i < model.loss_history.size(); ++i) {
    if (i) out << ' ';
    out << format_double(model.loss_history[i]);
  }
  out << '\n';
}

FactorModel load_factors(std::istream& in) {
  expect(in, "hmcd-factors");
  if (next_token(in) != "1") throw ParseError("unsupported factor model version", 0);
  FactorModel m;
  m.rank = read_count(in, "rank");
  const std::size_t rows = read_count(in, "num_rows");
  const std::size_t items = read_count(in, "num_items");
  expect(in, "seed");
  m.seed = parse_unsigned(next_token(in));
  m.p = Matrix(rows, m.rank);
  m.q = Matrix(items, m.rank);
  expect(in, "p");
  for (double& v : m.p.values()) v = parse_double(next_token(in));
  expect(in, "q");
  for (double& v : m.q.values()) v = parse_double(next_token(in));
  m.loss_history.resize(read_count(in, "loss_history"));
  for (double& v : m.loss_history) v = parse_double(next_token(in));
  return m;
}

}  // namespace hmcd
