#pragma once

// Maximization linear assignment problem.
//
// solve_lap_max runs a Jonker-Volgenant shortest-augmenting-path assignment
// (O(n^3)) on the negated weights and keeps the dual potentials. Every
// optimal assignment is a perfect matching on the edges that are tight under
// those potentials, so ties are resolved afterwards by walking rows in order
// and picking the smallest column that still admits a perfect matching on the
// tight edges. The result is the lexicographically smallest maximizer.

#include "gm/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace gm {

/// Frobenius inner product <W, P> = sum_i W(i, sigma(i)).
inline double assignment_value(const Matrix& w, const Permutation& p) {
  double total = 0.0;
  for (Index i = 0; i < p.size(); ++i) total += w(i, p[i]);
  return total;
}

namespace detail {

struct DualAssignment {
  std::vector<Index> row_to_col;
  std::vector<double> u;  // row potentials
  std::vector<double> v;  // column potentials
};

// Jonker-Volgenant: column reduction with reduction transfer, two rounds of
// augmenting row reduction, then shortest augmenting paths (Dijkstra with
// lazily updated column prices). Minimizes sum cost(i, col[i]) for a
// row-major n x n cost; returns optimal duals u_i + v_j <= cost(i, j).
inline DualAssignment lapjv(const std::vector<double>& cost, Index n) {
  constexpr double kLarge = std::numeric_limits<double>::infinity();
  const double* c = cost.data();
  std::vector<Index> x(n, -1);  // row -> column
  std::vector<Index> y(n, 0);   // column -> row
  std::vector<double> v(n, kLarge);
  std::vector<Index> free_rows;
  free_rows.reserve(n);

  // Column reduction.
  for (Index i = 0; i < n; ++i) {
    const double* row = c + i * n;
    for (Index j = 0; j < n; ++j) {
      if (row[j] < v[j]) {
        v[j] = row[j];
        y[j] = i;
      }
    }
  }
  std::vector<char> unique(n, 1);
  for (Index j = n - 1; j >= 0; --j) {
    const Index i = y[j];
    if (x[i] < 0) {
      x[i] = j;
    } else {
      unique[i] = 0;
      y[j] = -1;
    }
  }
  // Reduction transfer.
  for (Index i = 0; i < n; ++i) {
    if (x[i] < 0) {
      free_rows.push_back(i);
    } else if (unique[i]) {
      const Index j = x[i];
      double min = kLarge;
      const double* row = c + i * n;
      for (Index j2 = 0; j2 < n; ++j2)
        if (j2 != j) min = std::min(min, row[j2] - v[j2]);
      if (min < kLarge) v[j] -= min;
    }
  }

  // Augmenting row reduction.
  for (int round = 0; round < 2 && !free_rows.empty(); ++round) {
    const Index n_free = static_cast<Index>(free_rows.size());
    Index current = 0;
    Index new_free = 0;
    Index rr_count = 0;
    while (current < n_free) {
      ++rr_count;
      const Index free_i = free_rows[current++];
      const double* row = c + free_i * n;
      Index j1 = 0;
      double v1 = row[0] - v[0];
      Index j2 = -1;
      double v2 = kLarge;
      for (Index j = 1; j < n; ++j) {
        const double h = row[j] - v[j];
        if (h < v2) {
          if (h >= v1) {
            v2 = h;
            j2 = j;
          } else {
            v2 = v1;
            v1 = h;
            j2 = j1;
            j1 = j;
          }
        }
      }
      Index i0 = y[j1];
      const double v1_new = v[j1] - (v2 - v1);
      const bool v1_lowers = v1_new < v[j1];
      if (rr_count < current * n) {
        if (v1_lowers) {
          v[j1] = v1_new;
        } else if (i0 >= 0 && j2 >= 0) {
          j1 = j2;
          i0 = y[j2];
        }
        if (i0 >= 0) {
          if (v1_lowers) {
            free_rows[--current] = i0;
          } else {
            free_rows[new_free++] = i0;
          }
        }
      } else if (i0 >= 0) {
        free_rows[new_free++] = i0;
      }
      x[free_i] = j1;
      y[j1] = free_i;
    }
    free_rows.resize(new_free);
  }

  // Shortest augmenting paths for the remaining free rows.
  std::vector<double> d(n);
  std::vector<Index> pred(n);
  std::vector<Index> cols(n);
  for (Index free_i : free_rows) {
    const double* row0 = c + free_i * n;
    for (Index j = 0; j < n; ++j) {
      cols[j] = j;
      pred[j] = free_i;
      d[j] = row0[j] - v[j];
    }
    Index lo = 0;
    Index hi = 0;
    Index n_ready = 0;
    Index final_j = -1;
    while (final_j < 0) {
      if (lo == hi) {
        // Collect the columns at minimum distance into [lo, hi).
        n_ready = lo;
        hi = lo + 1;
        double mind = d[cols[lo]];
        for (Index k = hi; k < n; ++k) {
          const Index j = cols[k];
          if (d[j] <= mind) {
            if (d[j] < mind) {
              hi = lo;
              mind = d[j];
            }
            cols[k] = cols[hi];
            cols[hi++] = j;
          }
        }
        for (Index k = lo; k < hi; ++k) {
          if (y[cols[k]] < 0) {
            final_j = cols[k];
            break;
          }
        }
      }
      if (final_j >= 0) break;
      // Scan rows assigned to the minimum-distance columns. If a free column
      // turns up, lo stays at the start of the bucket so cols[lo] still holds
      // the minimum distance below.
      Index scan = lo;
      while (scan != hi && final_j < 0) {
        const Index j0 = cols[scan++];
        const Index i = y[j0];
        const double mind = d[j0];
        const double* row = c + i * n;
        const double h = row[j0] - v[j0] - mind;
        for (Index k = hi; k < n; ++k) {
          const Index j = cols[k];
          const double cred = row[j] - v[j] - h;
          if (cred < d[j]) {
            d[j] = cred;
            pred[j] = i;
            if (cred == mind) {
              if (y[j] < 0) {
                final_j = j;
                break;
              }
              cols[k] = cols[hi];
              cols[hi++] = j;
            }
          }
        }
      }
      if (final_j < 0) lo = scan;
    }
    const double mind = d[cols[lo]];
    for (Index k = 0; k < n_ready; ++k) {
      const Index j = cols[k];
      v[j] += d[j] - mind;
    }
    // Augment along pred.
    Index j = final_j;
    Index i = -1;
    while (i != free_i) {
      i = pred[j];
      y[j] = i;
      std::swap(j, x[i]);
    }
  }

  DualAssignment out;
  out.row_to_col = std::move(x);
  out.v = std::move(v);
  out.u.resize(n);
  for (Index i = 0; i < n; ++i) out.u[i] = c[i * n + out.row_to_col[i]] - out.v[out.row_to_col[i]];
  return out;
}

// Rewrites `mate` into the lexicographically smallest perfect matching of the
// bipartite graph `tight` (rows -> ascending column lists). `mate` must
// already be a perfect matching of that graph.
inline void lexicographic_matching(const std::vector<std::vector<Index>>& tight,
                                   std::vector<Index>& mate) {
  const Index n = static_cast<Index>(mate.size());
  std::vector<std::vector<Index>> rows_of(n);
  for (Index r = 0; r < n; ++r)
    for (Index c : tight[r]) rows_of[c].push_back(r);

  std::vector<Index> owner(n);
  for (Index r = 0; r < n; ++r) owner[mate[r]] = r;
  std::vector<char> fixed_col(n, 0);
  std::vector<Index> next_col(n);
  std::vector<char> reached(n);
  std::vector<Index> queue;
  queue.reserve(n);

  for (Index i = 0; i < n; ++i) {
    const Index target = mate[i];
    bool has_candidate = false;
    for (Index c : tight[i]) {
      if (c >= target) break;
      if (!fixed_col[c]) {
        has_candidate = true;
        break;
      }
    }
    if (has_candidate) {
      // Columns whose owner can shift along tight edges so that `target` is
      // taken over, freeing that column for row i.
      std::fill(reached.begin(), reached.end(), 0);
      queue.clear();
      queue.push_back(target);
      for (std::size_t head = 0; head < queue.size(); ++head) {
        const Index c = queue[head];
        for (Index r : rows_of[c]) {
          if (r <= i) continue;
          const Index mc = mate[r];
          if (mc == c || reached[mc]) continue;
          reached[mc] = 1;
          next_col[mc] = c;
          queue.push_back(mc);
        }
      }
      for (Index c : tight[i]) {
        if (c >= target) break;
        if (fixed_col[c] || !reached[c]) continue;
        // Rotate: i takes c, owner of c takes next_col[c], ... until target.
        std::vector<std::pair<Index, Index>> moves{{i, c}};
        for (Index col = c; col != target; col = next_col[col])
          moves.emplace_back(owner[col], next_col[col]);
        for (auto [r, col] : moves) {
          mate[r] = col;
          owner[col] = r;
        }
        break;
      }
    }
    fixed_col[mate[i]] = 1;
  }
}

}  // namespace detail

/// Tie detection tolerance on reduced costs, relative to the largest |W|.
inline constexpr double kLapTieTolerance = 1e-12;

/// Permutation maximizing sum_i W(i, sigma(i)); ties go to the
/// lexicographically smallest sigma.
inline Permutation solve_lap_max(const Matrix& w) {
  detail::require_square(w, "assignment weights");
  detail::require(w.allFinite(), "assignment weights must be finite");
  const Index n = w.rows();
  if (n == 0) return Permutation(std::vector<Index>{});

  std::vector<double> cost(static_cast<std::size_t>(n * n));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) cost[i * n + j] = -w(i, j);

  auto dual = detail::lapjv(cost, n);

  const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  const double tol = kLapTieTolerance * scale;
  std::vector<std::vector<Index>> tight(n);
  bool ties = false;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (cost[i * n + j] - dual.u[i] - dual.v[j] <= tol) tight[i].push_back(j);
    }
    // The matched edge is tight by construction; keep it even if rounding
    // pushed its reduced cost past tol.
    auto& row = tight[i];
    if (!std::binary_search(row.begin(), row.end(), dual.row_to_col[i]))
      row.insert(std::lower_bound(row.begin(), row.end(), dual.row_to_col[i]),
                 dual.row_to_col[i]);
    ties = ties || row.size() > 1;
  }
  if (ties) detail::lexicographic_matching(tight, dual.row_to_col);
  return Permutation(std::move(dual.row_to_col));
}

inline constexpr Index kLapBruteForceMaxSize = 9;

/// Exhaustive search over all n! permutations (n <= 9). Returns the
/// lexicographically smallest maximizer under exact comparison.
inline Permutation lap_bruteforce(const Matrix& w) {
  detail::require_square(w, "assignment weights");
  const Index n = w.rows();
  if (n > kLapBruteForceMaxSize)
    throw std::invalid_argument("lap_bruteforce supports n <= 9, got " + std::to_string(n));
  std::vector<Index> sigma(n);
  std::iota(sigma.begin(), sigma.end(), Index{0});
  std::vector<Index> best = sigma;
  double best_value = -std::numeric_limits<double>::infinity();
  do {
    double value = 0.0;
    for (Index i = 0; i < n; ++i) value += w(i, sigma[i]);
    if (value > best_value) {
      best_value = value;
      best = sigma;
    }
  } while (std::next_permutation(sigma.begin(), sigma.end()));
  return Permutation(std::move(best));
}

/// Permutation closest in Frobenius norm to D, i.e. argmax <D, P>.
inline Permutation project_to_permutation(const Matrix& d) { return solve_lap_max(d); }

inline Permutation project_to_permutation(const DoublyStochasticMatrix& d) {
  return solve_lap_max(d.matrix());
}

}  // namespace gm
