#pragma once

// Frank-Wolfe ascent on the doubly stochastic relaxation of graph matching,
//
//   maximize  trace(A D B D^T) + <L, D>   over doubly stochastic D,
//
// with L = 0 for the plain problem, L = 2 A12^T B12 for hard seeds and
// L = S^T for a similarity bonus trace(S D). A and B must be symmetric.

#include "gm/core.hpp"
#include "gm/ds_init.hpp"
#include "gm/lap.hpp"
#include "gm/random.hpp"
#include "gm/random_graphs.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

namespace gm {

struct FaqOptions {
  int max_iter = 100;
  /// Stop once the Frank-Wolfe gap <G, P - D> <= obj_tol * max(1, |f(D)|).
  double obj_tol = 1e-10;
  /// Stop once ||D_{k+1} - D_k||_F < d_tol.
  double d_tol = 1e-8;
  bool record_trajectory = true;
  /// Round D_final to the nearest permutation. When false, p_star is D_final
  /// itself if that is a permutation and the last ascent direction otherwise.
  bool project_final = true;
  /// Called with every iterate D_k (including D_0).
  std::function<void(int iteration, const Matrix& d)> observer;

  void validate() const {
    detail::require(max_iter >= 1, "max_iter must be at least 1");
    detail::require(obj_tol > 0.0 && d_tol > 0.0, "tolerances must be positive");
  }
};

struct IterationRecord {
  int iter = 0;
  double trace = 0.0;
  double accuracy = 0.0;
  double objective = 0.0;
  /// Step that produced this iterate (0 for the start).
  double alpha = 0.0;
  /// Trace of the assignment direction that produced this iterate (0 for the start).
  double direction_trace = 0.0;
};

using Trajectory = std::vector<IterationRecord>;

struct MatchResult {
  Permutation p_star;
  DoublyStochasticMatrix d_final;
  Trajectory trajectory;
  int iterations = 0;
  bool converged_at_permutation = false;
  /// Stopped on the Frank-Wolfe gap test (first-order stationary point).
  bool stationary = false;
  /// Objective of p_star.
  double final_objective = 0.0;
  /// Objective of d_final.
  double relaxed_objective = 0.0;

  double accuracy() const { return gm::accuracy(p_star); }
};

struct LineSearch {
  double alpha = 0.0;
  double objective = 0.0;  // f(alpha)
  // f(alpha) = a alpha^2 + b alpha + c
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// Maximizer over [0, 1] of a alpha^2 + b alpha + c. Concave: clamped vertex;
/// otherwise the better endpoint, ties going to alpha = 1. a = b = 0 is flat
/// and returns alpha = 0.
inline LineSearch maximize_quadratic_on_unit(double a, double b, double c) {
  LineSearch ls{0.0, c, a, b, c};
  if (a < 0.0) {
    ls.alpha = std::clamp(-b / (2.0 * a), 0.0, 1.0);
  } else if (a == 0.0 && b == 0.0) {
    ls.alpha = 0.0;
  } else {
    ls.alpha = (a + b >= 0.0) ? 1.0 : 0.0;
  }
  ls.objective = (a * ls.alpha + b) * ls.alpha + c;
  return ls;
}

/// Exact line search for trace(A D_a B D_a^T) along D_a = D + alpha (P - D).
inline LineSearch line_search_alpha(const Matrix& a, const Matrix& b, const Matrix& d,
                                    const Permutation& p) {
  detail::require_same_size(a.rows(), d.rows(), "line_search_alpha");
  detail::require_same_size(b.rows(), d.rows(), "line_search_alpha");
  detail::require_same_size(p.size(), d.rows(), "line_search_alpha");
  const Matrix delta = p.matrix() - d;
  const Matrix adb = a * d * b;
  const double qa = (a * delta * b).cwiseProduct(delta).sum();
  const double qb = 2.0 * adb.cwiseProduct(delta).sum();
  const double qc = adb.cwiseProduct(d).sum();
  return maximize_quadratic_on_unit(qa, qb, qc);
}

inline LineSearch line_search_alpha(const AdjacencyMatrix& a, const AdjacencyMatrix& b,
                                    const DoublyStochasticMatrix& d, const Permutation& p) {
  return line_search_alpha(a.matrix(), b.matrix(), d.matrix(), p);
}

inline bool is_permutation_matrix(const Matrix& d) {
  for (Index j = 0; j < d.cols(); ++j)
    for (Index i = 0; i < d.rows(); ++i)
      if (d(i, j) != 0.0 && d(i, j) != 1.0) return false;
  return validate_doubly_stochastic(d, 0.0);
}

namespace detail {

// Reports problem-level quantities for a sub-problem embedded in a larger
// one (hard seeds): trace offset and full vertex count.
struct Embedding {
  double trace_offset = 0.0;
  Index total_size = 0;
};

struct FrankWolfeOutcome {
  Matrix d;
  Trajectory trajectory;
  int iterations = 0;
  bool stationary = false;
  Permutation last_direction;
  double objective = 0.0;
};

inline double linear_term(const Matrix* l, const Matrix& d) {
  return l ? l->cwiseProduct(d).sum() : 0.0;
}

inline double linear_term(const Matrix* l, const Permutation& p) {
  return l ? assignment_value(*l, p) : 0.0;
}

inline FrankWolfeOutcome frank_wolfe(const Matrix& a, const Matrix& b, const Matrix* l, Matrix d,
                                     const FaqOptions& opts, Embedding embed) {
  const Index n = d.rows();
  if (embed.total_size == 0) embed.total_size = n;
  const double total = static_cast<double>(embed.total_size);

  FrankWolfeOutcome out;
  Matrix ad(n, n);
  Matrix adb(n, n);
  auto evaluate = [&](const Matrix& x) {
    ad.noalias() = a * x;
    adb.noalias() = ad * b;
    return adb.cwiseProduct(x).sum() + linear_term(l, x);
  };
  auto record = [&](int iter, double objective, double alpha, double dir_trace) {
    if (opts.observer) opts.observer(iter, d);
    if (!opts.record_trajectory) return;
    const double tr = d.trace() + embed.trace_offset;
    out.trajectory.push_back({iter, tr, tr / total, objective, alpha, dir_trace});
  };

  double f = evaluate(d);
  record(0, f, 0.0, 0.0);
  Matrix grad(n, n);
  for (int k = 0; k < opts.max_iter; ++k) {
    grad = 2.0 * adb;
    if (l) grad += *l;
    Permutation p = solve_lap_max(grad);
    out.last_direction = p;

    // Quadratic along the segment; b equals the Frank-Wolfe gap.
    const double quad_d = f - linear_term(l, d);
    const double adb_p = assignment_value(adb, p);
    const double qa = permuted_overlap(a, b, p) - 2.0 * adb_p + quad_d;
    const double qb = 2.0 * (adb_p - quad_d) + linear_term(l, p) - linear_term(l, d);
    if (qb <= opts.obj_tol * std::max(1.0, std::abs(f))) {
      out.stationary = true;
      break;
    }
    const LineSearch ls = maximize_quadratic_on_unit(qa, qb, f);
    if (ls.alpha == 0.0) {
      out.stationary = true;
      break;
    }

    // (1 - alpha) D + alpha P lands exactly on P when alpha = 1.
    Matrix next = (1.0 - ls.alpha) * d;
    for (Index i = 0; i < n; ++i) next(i, p[i]) += ls.alpha;
    const double change = (next - d).norm();
    d = std::move(next);
    ++out.iterations;
    f = evaluate(d);
    record(k + 1, f, ls.alpha, static_cast<double>(p.fixed_points()) + embed.trace_offset);
    if (change < opts.d_tol) break;
  }
  out.objective = f;
  out.d = std::move(d);
  return out;
}

inline MatchResult finish(FrankWolfeOutcome&& fw, const FaqOptions& opts,
                          const std::function<double(const Permutation&)>& objective_of) {
  MatchResult r;
  r.converged_at_permutation = is_permutation_matrix(fw.d);
  if (r.converged_at_permutation) {
    r.p_star = Permutation::from_matrix(fw.d);
  } else if (opts.project_final || fw.last_direction.size() == 0) {
    r.p_star = project_to_permutation(fw.d);
  } else {
    r.p_star = fw.last_direction;
  }
  r.final_objective = objective_of(r.p_star);
  r.relaxed_objective = fw.objective;
  r.iterations = fw.iterations;
  r.stationary = fw.stationary;
  r.trajectory = std::move(fw.trajectory);
  r.d_final = DoublyStochasticMatrix(std::move(fw.d), 1e-7);
  return r;
}

inline void check_problem(const AdjacencyMatrix& a, const AdjacencyMatrix& b,
                          const DoublyStochasticMatrix& d0) {
  require_same_size(a.size(), b.size(), "faq (graph sizes)");
  require_same_size(a.size(), d0.size(), "faq (initialization size)");
}

}  // namespace detail

/// FAQ: Frank-Wolfe on trace(A D B D^T) from D0, gradient 2 A D B.
inline MatchResult faq(const AdjacencyMatrix& a, const AdjacencyMatrix& b,
                       const DoublyStochasticMatrix& d0, const FaqOptions& opts = {}) {
  opts.validate();
  detail::check_problem(a, b, d0);
  auto fw = detail::frank_wolfe(a.matrix(), b.matrix(), nullptr, d0.matrix(), opts, {});
  return detail::finish(std::move(fw), opts, [&](const Permutation& p) {
    return static_cast<double>(permuted_overlap(a, b, p));
  });
}

/// Objective of the similarity-augmented problem at a permutation:
/// trace(A P B P^T) + trace(S P).
inline double similarity_objective(const AdjacencyMatrix& a, const AdjacencyMatrix& b,
                                   const Matrix& s, const Permutation& p) {
  // trace(S P) = sum_i S(sigma(i), i)
  double lin = 0.0;
  for (Index i = 0; i < p.size(); ++i) lin += s(p[i], i);
  return static_cast<double>(permuted_overlap(a, b, p)) + lin;
}

/// Maximizes trace(A D B D^T) + trace(S D); gradient 2 A D B + S^T.
inline MatchResult faq_with_similarity(const AdjacencyMatrix& a, const AdjacencyMatrix& b,
                                       const Matrix& s, const DoublyStochasticMatrix& d0,
                                       const FaqOptions& opts = {}) {
  opts.validate();
  detail::check_problem(a, b, d0);
  detail::require_same_size(a.size(), s.rows(), "faq_with_similarity (similarity rows)");
  detail::require_square(s, "similarity matrix");
  const Matrix linear = s.transpose();
  auto fw = detail::frank_wolfe(a.matrix(), b.matrix(), &linear, d0.matrix(), opts, {});
  return detail::finish(std::move(fw), opts, [&](const Permutation& p) {
    return similarity_objective(a, b, s, p);
  });
}

/// Objective with the first `seeds` vertices matched by identity:
/// 2 trace(A12 Q B12^T) + trace(A22 Q B22 Q^T) for the non-seed part Q of p.
inline double hard_seeded_objective(const AdjacencyMatrix& a, const AdjacencyMatrix& b,
                                    Index seeds, const Permutation& p) {
  const Index n = a.size();
  double cross = 0.0;
  double inner = 0.0;
  for (Index i = 0; i < seeds; ++i)
    for (Index j = seeds; j < n; ++j) cross += a(i, j) * b(i, p[j]);
  for (Index i = seeds; i < n; ++i)
    for (Index j = seeds; j < n; ++j) inner += a(i, j) * b(p[i], p[j]);
  return 2.0 * cross + inner;
}

/// Hard seeds: vertices 0..seeds-1 are matched to themselves and held fixed.
/// d0_nonseed is the start for the (n - seeds) non-seed block.
inline MatchResult faq_hard_seeded(const AdjacencyMatrix& a, const AdjacencyMatrix& b, Index seeds,
                                   const DoublyStochasticMatrix& d0_nonseed,
                                   const FaqOptions& opts = {}) {
  opts.validate();
  const Index n = a.size();
  detail::require_same_size(n, b.size(), "faq_hard_seeded (graph sizes)");
  detail::require(seeds >= 0 && seeds < n, "seed count must lie in [0, n)");
  const Index m = n - seeds;
  detail::require_same_size(m, d0_nonseed.size(), "faq_hard_seeded (non-seed start size)");

  const Matrix a22 = a.matrix().bottomRightCorner(m, m);
  const Matrix b22 = b.matrix().bottomRightCorner(m, m);
  const Matrix a12 = a.matrix().topRightCorner(seeds, m);
  const Matrix b12 = b.matrix().topRightCorner(seeds, m);
  const Matrix linear = 2.0 * a12.transpose() * b12;

  auto fw = detail::frank_wolfe(a22, b22, &linear, d0_nonseed.matrix(), opts,
                                {static_cast<double>(seeds), n});

  auto embed = [&](const Permutation& q) {
    std::vector<Index> sigma(n);
    for (Index i = 0; i < seeds; ++i) sigma[i] = i;
    for (Index i = 0; i < m; ++i) sigma[seeds + i] = seeds + q[i];
    return Permutation(std::move(sigma));
  };
  MatchResult r = detail::finish(std::move(fw), opts, [&](const Permutation& q) {
    return hard_seeded_objective(a, b, seeds, embed(q));
  });
  r.p_star = embed(r.p_star);
  Matrix full = Matrix::Zero(n, n);
  full.topLeftCorner(seeds, seeds).setIdentity();
  full.bottomRightCorner(m, m) = r.d_final.matrix();
  r.d_final = DoublyStochasticMatrix(std::move(full), 1e-7);
  return r;
}

// ---------------------------------------------------------------------------
// Diagnostics

struct ErrorBreakdown {
  Index within_d0 = 0;
  Index between_d0 = 0;
  Index within_sbm = 0;
  Index between_sbm = 0;

  Index errors() const { return within_d0 + between_d0; }
  friend bool operator==(const ErrorBreakdown&, const ErrorBreakdown&) = default;
};

/// Classifies every vertex with sigma(i) != i by whether i and sigma(i)
/// share a part, once for each partition.
inline ErrorBreakdown error_breakdown(const Permutation& p, const Partition& d0_partition,
                                      const Partition& sbm_partition) {
  detail::require_same_size(p.size(), d0_partition.size(), "error_breakdown");
  detail::require_same_size(p.size(), sbm_partition.size(), "error_breakdown");
  ErrorBreakdown e;
  for (Index i = 0; i < p.size(); ++i) {
    const Index j = p[i];
    if (j == i) continue;
    (d0_partition[i] == d0_partition[j] ? e.within_d0 : e.between_d0) += 1;
    (sbm_partition[i] == sbm_partition[j] ? e.within_sbm : e.between_sbm) += 1;
  }
  return e;
}

struct TwoStepReport {
  bool converged_to_identity = false;
  int steps_used = 0;
  double start_trace = 0.0;
  std::optional<TheoryThresholds> thresholds;
};

/// Runs at most two Frank-Wolfe steps from d0 and reports whether the iterate
/// is exactly the identity by then. The thresholds are carried through for
/// reporting only.
inline TwoStepReport two_step_check(const AdjacencyMatrix& a, const AdjacencyMatrix& b,
                                    const DoublyStochasticMatrix& d0,
                                    std::optional<TheoryThresholds> thresholds = std::nullopt) {
  FaqOptions opts;
  opts.max_iter = 2;
  opts.project_final = false;
  opts.record_trajectory = false;
  detail::check_problem(a, b, d0);
  auto fw = detail::frank_wolfe(a.matrix(), b.matrix(), nullptr, d0.matrix(), opts, {});
  TwoStepReport r;
  r.steps_used = fw.iterations;
  r.start_trace = d0.trace();
  r.converged_to_identity = fw.d == Matrix::Identity(a.size(), a.size());
  r.thresholds = thresholds;
  return r;
}

struct RestartRun {
  MatchResult result;
  double objective = 0.0;  // trace(A P* B P*^T)
  std::uint64_t start_index = 0;
};

struct RestartProbe {
  std::vector<RestartRun> runs;  // best objective first
  /// Best objective minus the best objective among runs that found a
  /// different permutation; 0 if every run agrees.
  double gap_to_next = 0.0;
};

/// Runs FAQ from k random doubly stochastic starts.
inline RestartProbe random_restart_probe(const AdjacencyMatrix& a, const AdjacencyMatrix& b, int k,
                                         const FaqOptions& opts, Rng& rng,
                                         RandomDsMethod method = {}) {
  detail::require(k >= 1, "need at least one restart");
  RestartProbe probe;
  for (int t = 0; t < k; ++t) {
    auto d0 = random_doubly_stochastic(a.size(), rng, method);
    RestartRun run{faq(a, b, d0, opts), 0.0, static_cast<std::uint64_t>(t)};
    run.objective = run.result.final_objective;
    probe.runs.push_back(std::move(run));
  }
  std::stable_sort(probe.runs.begin(), probe.runs.end(),
                   [](const RestartRun& x, const RestartRun& y) { return x.objective > y.objective; });
  const auto& best = probe.runs.front();
  for (const auto& run : probe.runs) {
    if (run.result.p_star != best.result.p_star) {
      probe.gap_to_next = best.objective - run.objective;
      break;
    }
  }
  return probe;
}

}  // namespace gm
