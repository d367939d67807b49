#include <algorithm>

#include "hmcd/factorization.hpp"

namespace hmcd::kernels {
namespace {

constexpr double kDenominatorFloor = 1e-12;

// den = x.row(r) * g for a symmetric Gram matrix g (f x f), then the
// multiplicative rule x(r,k) *= num(r,k) / den(k).
void multiplicative_row(Matrix& x, const Matrix& num, const Matrix& g, std::size_t r,
                        std::vector<double>& den) {
  const std::size_t f = x.cols();
  std::fill(den.begin(), den.end(), 0.0);
  for (std::size_t a = 0; a < f; ++a) {
    const double xa = x(r, a);
    const auto ga = g.row(a);
    for (std::size_t k = 0; k < f; ++k) den[k] += xa * ga[k];
  }
  for (std::size_t k = 0; k < f; ++k) x(r, k) *= num(r, k) / std::max(den[k], kDenominatorFloor);
}

// Row r of ||m||^2 - 2 <m, p q^T>, with mq = m * q.
double row_residual(const SparseMatrix& m, const Matrix& p, const Matrix& mq, std::size_t r) {
  double sq = 0.0;
  for (std::size_t e = m.row_ptr[r]; e < m.row_ptr[r + 1]; ++e) sq += m.values[e] * m.values[e];
  return sq - 2.0 * dot(p.row(r), mq.row(r));
}

double gram_term(const Matrix& gp, const Matrix& gq) {
  double s = 0.0;
  for (std::size_t a = 0; a < gp.rows(); ++a) {
    for (std::size_t b = 0; b < gp.cols(); ++b) s += gp(a, b) * gq(a, b);
  }
  return s;
}

// ---- serial reference ----

Matrix gram_serial(const Matrix& x) {
  const std::size_t f = x.cols();
  Matrix g(f, f);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t a = 0; a < f; ++a) {
      for (std::size_t b = 0; b < f; ++b) g(a, b) += x(r, a) * x(r, b);
    }
  }
  return g;
}

// out = m * x, where m is rows x cols sparse and x is cols x f.
Matrix sparse_times_serial(const SparseMatrix& m, const Matrix& x) {
  Matrix out(m.rows, x.cols());
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t e = m.row_ptr[r]; e < m.row_ptr[r + 1]; ++e) {
      const double v = m.values[e];
      const auto src = x.row(m.col_idx[e]);
      for (std::size_t k = 0; k < x.cols(); ++k) out(r, k) += v * src[k];
    }
  }
  return out;
}

// out = m^T * x by scattering rows of m.
Matrix sparse_transpose_times_serial(const SparseMatrix& m, const Matrix& x) {
  Matrix out(m.cols, x.cols());
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t e = m.row_ptr[r]; e < m.row_ptr[r + 1]; ++e) {
      const double v = m.values[e];
      const ItemIndex j = m.col_idx[e];
      for (std::size_t k = 0; k < x.cols(); ++k) out(j, k) += v * x(r, k);
    }
  }
  return out;
}

// ---- OpenMP ----

Matrix gram_omp(const Matrix& x) {
  const std::size_t f = x.cols();
  Matrix g(f, f);
  const auto cells = static_cast<std::ptrdiff_t>(f * f);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ab = 0; ab < cells; ++ab) {
    const std::size_t a = static_cast<std::size_t>(ab) / f;
    const std::size_t b = static_cast<std::size_t>(ab) % f;
    double s = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) s += x(r, a) * x(r, b);
    g(a, b) = s;
  }
  return g;
}

Matrix sparse_times_omp(const SparseMatrix& m, const Matrix& x) {
  Matrix out(m.rows, x.cols());
  const auto rows = static_cast<std::ptrdiff_t>(m.rows);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    for (std::size_t e = m.row_ptr[r]; e < m.row_ptr[r + 1]; ++e) {
      const double v = m.values[e];
      const auto src = x.row(m.col_idx[e]);
      for (std::size_t k = 0; k < x.cols(); ++k) out(r, k) += v * src[k];
    }
  }
  return out;
}

}  // namespace

double nmf_iteration_serial(const SparseMatrix& m, const SparseMatrix& mt, Matrix& p, Matrix& q,
                            int inner_updates) {
  (void)mt;
  std::vector<double> den(p.cols());

  const Matrix gp = gram_serial(p);
  const Matrix q_num = sparse_transpose_times_serial(m, p);
  for (std::size_t j = 0; j < q.rows(); ++j)
    for (int s = 0; s < inner_updates; ++s) multiplicative_row(q, q_num, gp, j, den);

  const Matrix gq = gram_serial(q);
  const Matrix p_num = sparse_times_serial(m, q);
  for (std::size_t r = 0; r < p.rows(); ++r)
    for (int s = 0; s < inner_updates; ++s) multiplicative_row(p, p_num, gq, r, den);

  double loss = 0.0;
  for (std::size_t r = 0; r < m.rows; ++r) loss += row_residual(m, p, p_num, r);
  loss += gram_term(gram_serial(p), gq);
  return std::max(loss, 0.0);
}

double nmf_iteration_omp(const SparseMatrix& m, const SparseMatrix& mt, Matrix& p, Matrix& q,
                         int inner_updates) {
  const Matrix gp = gram_omp(p);
  // Rows of mt are the columns of m with row indices ascending, matching the
  // scatter order of the serial version.
  const Matrix q_num = sparse_times_omp(mt, p);
  const auto items = static_cast<std::ptrdiff_t>(q.rows());
#pragma omp parallel
  {
    std::vector<double> den(p.cols());
#pragma omp for schedule(static)
    for (std::ptrdiff_t j = 0; j < items; ++j)
      for (int s = 0; s < inner_updates; ++s) multiplicative_row(q, q_num, gp, j, den);
  }

  const Matrix gq = gram_omp(q);
  const Matrix p_num = sparse_times_omp(m, q);
  const auto rows = static_cast<std::ptrdiff_t>(p.rows());
  std::vector<double> residual(m.rows);
#pragma omp parallel
  {
    std::vector<double> den(p.cols());
#pragma omp for schedule(static)
    for (std::ptrdiff_t r = 0; r < rows; ++r)
      for (int s = 0; s < inner_updates; ++s) multiplicative_row(p, p_num, gq, r, den);
#pragma omp for schedule(static)
    for (std::ptrdiff_t r = 0; r < rows; ++r) residual[r] = row_residual(m, p, p_num, r);
  }

  double loss = 0.0;
  for (const double v : residual) loss += v;
  loss += gram_term(gram_omp(p), gq);
  return std::max(loss, 0.0);
}

}  // namespace hmcd::kernels
