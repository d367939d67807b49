#pragma once

// Brute-force reference computations used as test oracles. Nothing here calls
// into the library's algorithms; only plain data types are shared.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "hmcd/hmm.hpp"
#include "hmcd/matrix.hpp"

namespace oracle {

using hmcd::HmmParams;
using hmcd::ItemIndex;
using hmcd::Matrix;

// Calls fn(path) for every one of h^T state paths, lexicographic order.
inline void for_each_path(std::size_t h, std::size_t T, const std::function<void(const std::vector<std::size_t>&)>& fn) {
  std::vector<std::size_t> path(T, 0);
  while (true) {
    fn(path);
    std::size_t t = T;
    while (t > 0) {
      --t;
      if (++path[t] < h) break;
      path[t] = 0;
      if (t == 0) return;
    }
    if (T == 0) return;
  }
}

inline double joint_probability(const HmmParams& m, std::span<const ItemIndex> y, const std::vector<std::size_t>& z) {
  double p = 1.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    p *= (t == 0 ? m.pi[z[0]] : m.trans(z[t - 1], z[t])) * m.emis(z[t], y[t]);
  }
  return p;
}

// P(y) summed over all paths.
inline double likelihood(const HmmParams& m, std::span<const ItemIndex> y) {
  if (y.empty()) return 1.0;
  double total = 0.0;
  for_each_path(m.num_states, y.size(), [&](const auto& z) { total += joint_probability(m, y, z); });
  return total;
}

struct BestPath {
  std::vector<std::size_t> path;
  double probability = -1.0;
};

// Highest-probability path; the first one found in lexicographic order wins ties.
inline BestPath best_path(const HmmParams& m, std::span<const ItemIndex> y) {
  BestPath best;
  for_each_path(m.num_states, y.size(), [&](const auto& z) {
    const double p = joint_probability(m, y, z);
    if (p > best.probability) best = {z, p};
  });
  return best;
}

inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> v(n);
  double s = 0.0;
  for (auto& x : v) s += (x = u(rng));
  for (auto& x : v) x /= s;
  return v;
}

inline HmmParams random_model(std::mt19937_64& rng, std::size_t h, std::size_t m) {
  HmmParams p;
  p.num_states = h;
  p.num_items = m;
  p.pi = random_simplex(rng, h);
  p.trans = Matrix(h, h);
  p.emis = Matrix(h, m);
  for (std::size_t s = 0; s < h; ++s) {
    auto a = random_simplex(rng, h);
    std::copy(a.begin(), a.end(), p.trans.row(s).begin());
    auto b = random_simplex(rng, m);
    std::copy(b.begin(), b.end(), p.emis.row(s).begin());
  }
  return p;
}

// The toy model with pi=[1,0], A=[[0.9,0.1],[0,1]], B=[[0.9,0.1,0],[0,0.1,0.9]].
inline HmmParams toy_model() {
  HmmParams p;
  p.num_states = 2;
  p.num_items = 3;
  p.pi = {1.0, 0.0};
  p.trans = Matrix(2, 2);
  p.trans(0, 0) = 0.9;
  p.trans(0, 1) = 0.1;
  p.trans(1, 1) = 1.0;
  p.emis = Matrix(2, 3);
  p.emis(0, 0) = 0.9;
  p.emis(0, 1) = 0.1;
  p.emis(1, 1) = 0.1;
  p.emis(1, 2) = 0.9;
  return p;
}

// Sliding-window objective evaluated pair by pair over 1-d or d-dim points.
inline double pair_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline double mean_intra(const std::vector<std::vector<double>>& pts, std::size_t lo, std::size_t hi) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = lo; i < hi; ++i)
    for (std::size_t j = i + 1; j < hi; ++j) {
      s += pair_distance(pts[i], pts[j]);
      ++n;
    }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

inline double window_objective(const std::vector<std::vector<double>>& pts, std::size_t t) {
  double cross = 0.0;
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = t; j < pts.size(); ++j) cross += pair_distance(pts[i], pts[j]);
  cross /= static_cast<double>(t * (pts.size() - t));
  return cross - 0.5 * (mean_intra(pts, 0, t) + mean_intra(pts, t, pts.size()));
}

// Time-aware nDCG straight from its definition (H assumed duplicate-free).
inline double ndcg(std::span<const ItemIndex> recs, std::span<const ItemIndex> H, std::size_t k) {
  auto gain = [&](ItemIndex item) {
    for (std::size_t p = 0; p < H.size(); ++p)
      if (H[p] == item) return static_cast<double>(H.size() - p);
    return 0.0;
  };
  double dcg = 0.0;
  for (std::size_t j = 0; j < std::min(k, recs.size()); ++j) dcg += gain(recs[j]) / std::log2(j + 2.0);
  double idcg = 0.0;
  for (std::size_t j = 0; j < std::min(k, H.size()); ++j) idcg += gain(H[j]) / std::log2(j + 2.0);
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

// Central finite-difference derivative of f at x along coordinate i.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f,
                                  std::vector<double> x, std::size_t i, double h = 1e-6) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

// Random m x n matrix of exact rank r with non-negative factors.
inline Matrix low_rank(std::mt19937_64& rng, std::size_t m, std::size_t n, std::size_t r) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Matrix a(m, r), b(r, n), out(m, n);
  for (auto& v : a.values()) v = u(rng);
  for (auto& v : b.values()) v = u(rng);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < r; ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

inline double frobenius_error(const Matrix& m, const Matrix& p, const Matrix& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) {
      double v = 0.0;
      for (std::size_t k = 0; k < p.cols(); ++k) v += p(i, k) * q(j, k);
      s += (m(i, j) - v) * (m(i, j) - v);
    }
  return std::sqrt(s);
}

}  // namespace oracle
