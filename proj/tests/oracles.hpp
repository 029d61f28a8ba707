#pragma once

// Test-side reference implementations, kept deliberately naive so they can
// cross-check the optimized library code. Everything here prefers clarity
// and brute force over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "core/simplex_lp.hpp"

namespace oracles {

// Exhaustive basic-feasible-solution enumeration for the assignment LP
//   max mu0.x  s.t.  sum_j x_ij = 1 (each i),  mu_k.x <= c_k,  x >= 0.
// Standard form adds one slack per coupling row; every vertex is a basis of
// the (n+K) x (nJ+K) system, so trying every column subset finds the exact
// optimum of any feasible bounded instance. Usable only for tiny sizes.
struct EnumeratedLp {
  bool feasible = false;
  double objective = 0.0;
  std::vector<double> x;
};

inline EnumeratedLp enumerate_lp(const treatsel::DeterministicProblem& p) {
  const int rows = p.n + p.K;
  const int cols = p.n * p.J + p.K;
  std::vector<double> a(static_cast<std::size_t>(rows) * cols, 0.0);
  std::vector<double> b(rows, 0.0);
  std::vector<double> cost(cols, 0.0);
  for (int i = 0; i < p.n; ++i) {
    for (int j = 0; j < p.J; ++j) a[static_cast<std::size_t>(i) * cols + i * p.J + j] = 1.0;
    b[i] = 1.0;
  }
  for (int k = 0; k < p.K; ++k) {
    const int r = p.n + k;
    for (int q = 0; q < p.n * p.J; ++q) a[static_cast<std::size_t>(r) * cols + q] = p.mu[k + 1][q];
    a[static_cast<std::size_t>(r) * cols + p.n * p.J + k] = 1.0;
    b[r] = p.c[k];
  }
  for (int q = 0; q < p.n * p.J; ++q) cost[q] = p.mu[0][q];

  EnumeratedLp best;
  std::vector<int> pick(rows);
  std::vector<double> m, rhs, xb;

  // Solve the rows x rows system for the chosen basis via Gaussian elimination.
  auto try_basis = [&](const std::vector<int>& basis) {
    m.assign(static_cast<std::size_t>(rows) * rows, 0.0);
    rhs = b;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < rows; ++c) m[static_cast<std::size_t>(r) * rows + c] = a[static_cast<std::size_t>(r) * cols + basis[c]];
    }
    for (int col = 0; col < rows; ++col) {
      int piv = -1;
      double mag = 1e-10;
      for (int r = col; r < rows; ++r) {
        double v = std::fabs(m[static_cast<std::size_t>(r) * rows + col]);
        if (v > mag) {
          mag = v;
          piv = r;
        }
      }
      if (piv < 0) return;
      if (piv != col) {
        for (int c = col; c < rows; ++c) std::swap(m[static_cast<std::size_t>(piv) * rows + c], m[static_cast<std::size_t>(col) * rows + c]);
        std::swap(rhs[piv], rhs[col]);
      }
      const double d = m[static_cast<std::size_t>(col) * rows + col];
      for (int r = 0; r < rows; ++r) {
        if (r == col) continue;
        const double f = m[static_cast<std::size_t>(r) * rows + col] / d;
        if (f == 0.0) continue;
        for (int c = col; c < rows; ++c) m[static_cast<std::size_t>(r) * rows + c] -= f * m[static_cast<std::size_t>(col) * rows + c];
        rhs[r] -= f * rhs[col];
      }
    }
    xb.assign(rows, 0.0);
    for (int r = 0; r < rows; ++r) xb[r] = rhs[r] / m[static_cast<std::size_t>(r) * rows + r];
    for (double v : xb) {
      if (!(v >= -1e-9)) return;
    }
    double obj = 0.0;
    for (int r = 0; r < rows; ++r) obj += cost[basis[r]] * std::max(0.0, xb[r]);
    if (!best.feasible || obj > best.objective) {
      best.feasible = true;
      best.objective = obj;
      best.x.assign(static_cast<std::size_t>(p.n) * p.J, 0.0);
      for (int r = 0; r < rows; ++r) {
        if (basis[r] < p.n * p.J) best.x[basis[r]] = std::max(0.0, xb[r]);
      }
    }
  };

  // All column subsets of size rows.
  std::vector<int> idx(rows);
  for (int r = 0; r < rows; ++r) idx[r] = r;
  while (true) {
    try_basis(idx);
    int pos = rows - 1;
    while (pos >= 0 && idx[pos] == cols - rows + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int r = pos + 1; r < rows; ++r) idx[r] = idx[r - 1] + 1;
  }
  return best;
}

// Random LP instances for oracle comparisons.
inline treatsel::DeterministicProblem random_lp(std::mt19937_64& rng, int max_n, int max_j,
                                                int max_k, bool force_feasible_origin = false) {
  std::uniform_int_distribution<int> nd(1, max_n), jd(2, max_j), kd(0, max_k);
  std::uniform_real_distribution<double> vd(-2.0, 2.0), cd(-0.5, 1.5);
  treatsel::DeterministicProblem p;
  p.n = nd(rng);
  p.J = jd(rng);
  p.K = kd(rng);
  p.mu.assign(p.K + 1, std::vector<double>(static_cast<std::size_t>(p.n) * p.J));
  for (auto& v : p.mu) {
    for (double& d : v) d = vd(rng);
  }
  p.c.resize(p.K);
  for (int k = 0; k < p.K; ++k) {
    p.c[k] = cd(rng);
    if (force_feasible_origin) {
      // Guarantee arm 0 everywhere satisfies the row.
      double lhs = 0.0;
      for (int i = 0; i < p.n; ++i) lhs += p.mu[k + 1][static_cast<std::size_t>(i) * p.J];
      p.c[k] = std::max(p.c[k], lhs + 0.1);
    }
  }
  return p;
}

}  // namespace oracles
