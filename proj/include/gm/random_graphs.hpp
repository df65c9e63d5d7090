#pragma once

// Correlated Erdos-Renyi graph pairs: parameter construction for the
// homogeneous, block-model and dot-product settings, the pair sampler, the
// exact expectation of trace(A P B Q^T) and the two-step theory thresholds.

#include "gm/core.hpp"
#include "gm/random.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace gm {

struct BivariateBernoulli {
  bool x = false;
  bool y = false;
};

/// Draws (X, Y), each marginally Bernoulli(lambda) with corr(X, Y) = rho,
/// through three independent Bernoullis: X = Z0, Y = (1 - Z0) Z1 + Z0 Z2.
inline BivariateBernoulli sample_bivariate_bernoulli(double lambda, double rho, Rng& rng) {
  detail::require(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0,1]");
  detail::require(rho >= 0.0 && rho <= 1.0, "rho must lie in [0,1]");
  const bool z0 = bernoulli(rng, lambda);
  const bool z1 = bernoulli(rng, lambda * (1.0 - rho));
  const bool z2 = bernoulli(rng, lambda + rho * (1.0 - lambda));
  return {z0, z0 ? z2 : z1};
}

/// Edge-probability matrix Lambda and edge-correlation matrix R.
/// Lambda's diagonal is zeroed on construction; R's diagonal is ignored.
class CorrErParams {
 public:
  CorrErParams() = default;

  CorrErParams(Matrix lambda, Matrix r) : lambda_(std::move(lambda)), r_(std::move(r)) {
    detail::require_square(lambda_, "Lambda");
    detail::require_square(r_, "R");
    detail::require_same_size(lambda_.rows(), r_.rows(), "CorrErParams");
    lambda_.diagonal().setZero();
    r_.diagonal().setZero();
    for (Index j = 0; j < size(); ++j) {
      for (Index i = 0; i < size(); ++i) {
        const double l = lambda_(i, j);
        const double c = r_(i, j);
        detail::require(std::isfinite(l) && l >= 0.0 && l <= 1.0,
                        "Lambda entries must lie in [0,1]");
        detail::require(std::isfinite(c) && c >= 0.0 && c <= 1.0,
                        "R entries must lie in [0,1]");
        detail::require(l == lambda_(j, i), "Lambda must be symmetric");
        detail::require(c == r_(j, i), "R must be symmetric");
      }
    }
  }

  Index size() const { return lambda_.rows(); }
  const Matrix& lambda() const { return lambda_; }
  const Matrix& r() const { return r_; }

 private:
  Matrix lambda_;
  Matrix r_;
};

/// Lambda = p (J - I), R = r J.
inline CorrErParams hom_params(Index n, double p, double r) {
  detail::require(n >= 1, "n must be positive");
  detail::require(p >= 0.0 && p <= 1.0 && r >= 0.0 && r <= 1.0,
                  "p and r must lie in [0,1]");
  return CorrErParams(Matrix::Constant(n, n, p), Matrix::Constant(n, n, r));
}

/// Part label of every vertex when [n] is cut into consecutive blocks.
inline std::vector<int> block_labels(std::span<const Index> block_sizes) {
  std::vector<int> labels;
  for (std::size_t k = 0; k < block_sizes.size(); ++k) {
    detail::require(block_sizes[k] >= 1, "block sizes must be positive");
    labels.insert(labels.end(), static_cast<std::size_t>(block_sizes[k]), static_cast<int>(k));
  }
  return labels;
}

/// Stochastic block model with consecutive blocks.
inline CorrErParams sbm_params(std::span<const Index> block_sizes, double within_p,
                               double between_p, double r) {
  detail::require(!block_sizes.empty(), "at least one block is required");
  detail::require(within_p >= 0.0 && within_p <= 1.0 && between_p >= 0.0 && between_p <= 1.0,
                  "block probabilities must lie in [0,1]");
  const auto labels = block_labels(block_sizes);
  const Index n = static_cast<Index>(labels.size());
  Matrix lambda(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) lambda(i, j) = labels[i] == labels[j] ? within_p : between_p;
  return CorrErParams(std::move(lambda), Matrix::Constant(n, n, r));
}

/// Random dot product graph: Lambda = X X^T.
inline CorrErParams rdpg_params(const Matrix& latent_positions, double r) {
  Matrix lambda = latent_positions * latent_positions.transpose();
  lambda.diagonal().setZero();
  // Rounding can push an inner product a hair past 1 even for simplex points.
  for (Index j = 0; j < lambda.cols(); ++j) {
    for (Index i = 0; i < lambda.rows(); ++i) {
      const double x = lambda(i, j);
      detail::require(x >= -1e-12 && x <= 1.0 + 1e-12,
                      "latent inner product outside [0,1] at (" + std::to_string(i) + "," +
                          std::to_string(j) + ")");
      lambda(i, j) = std::clamp(x, 0.0, 1.0);
    }
  }
  const Index n = lambda.rows();
  return CorrErParams(std::move(lambda), Matrix::Constant(n, n, r));
}

/// n rows, each the first two coordinates of a uniform point on the
/// 2-simplex (Dirichlet(1,1,1)), via normalized exponentials.
inline Matrix sample_dirichlet_positions(Index n, Rng& rng) {
  Matrix x(n, 2);
  for (Index i = 0; i < n; ++i) {
    const double e0 = exponential(rng);
    const double e1 = exponential(rng);
    const double e2 = exponential(rng);
    const double total = e0 + e1 + e2;
    x(i, 0) = e0 / total;
    x(i, 1) = e1 / total;
  }
  return x;
}

struct GraphPair {
  AdjacencyMatrix a;
  AdjacencyMatrix b;
};

/// Independent pairs u < v, each drawn with sample_bivariate_bernoulli.
inline GraphPair sample_corr_er(const CorrErParams& params, Rng& rng) {
  const Index n = params.size();
  AdjacencyBuilder a(n);
  AdjacencyBuilder b(n);
  for (Index u = 0; u < n; ++u) {
    for (Index v = u + 1; v < n; ++v) {
      const auto draw = sample_bivariate_bernoulli(params.lambda()(u, v), params.r()(u, v), rng);
      if (draw.x) a.add_edge(u, v);
      if (draw.y) b.add_edge(u, v);
    }
  }
  return {std::move(a).build(), std::move(b).build()};
}

/// S(i,j) = R(i,j) Lambda(i,j) (1 - Lambda(i,j)); zero diagonal.
inline Matrix covariance_matrix(const CorrErParams& params) {
  const Matrix& l = params.lambda();
  return params.r().cwiseProduct(l).cwiseProduct((1.0 - l.array()).matrix());
}

/// E[trace(A P B Q^T)] for (A, B) ~ CorrER(Lambda, R):
/// trace(Lambda P Lambda Q^T) + sum_{i != j} S_ij (P_ii Q_jj + P_ji Q_ij).
inline double expected_trace(const CorrErParams& params, const Permutation& p,
                             const Permutation& q) {
  const Index n = params.size();
  detail::require_same_size(n, p.size(), "expected_trace");
  detail::require_same_size(n, q.size(), "expected_trace");
  const Matrix& l = params.lambda();
  const Matrix s = covariance_matrix(params);

  // trace(L P L Q^T) = sum_{i,j} L(i,j) L(p[j], q[i]).
  double mean_term = 0.0;
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) mean_term += l(i, j) * l(p[j], q[i]);

  double cov_term = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double both_fixed = (p[i] == i && q[j] == j) ? 1.0 : 0.0;
      const double swapped = (p[j] == i && q[i] == j) ? 1.0 : 0.0;
      cov_term += s(i, j) * (both_fixed + swapped);
    }
  }
  return mean_term + cov_term;
}

/// Quantities from the two-step convergence result.
struct TheoryThresholds {
  double c = 0.0;        // lower bound on the edgewise covariance
  double epsilon = 0.0;  // variance bound
  double ell = 0.0;      // minimum start trace
  double m = 0.0;        // one-step basin width
  double delta = 0.0;
  Index n = 0;

  /// The bound only constrains anything when the required trace fits in [0, n].
  bool binding() const { return ell <= static_cast<double>(n); }
};

/// epsilon = max 3 L(1-L) + 2R, C = min S over off-diagonal pairs,
/// ell = 2 sqrt(n^(1+2 delta)) epsilon / C^2, m = C^2 n^(1-delta) log(n) / epsilon.
inline TheoryThresholds theory_thresholds(const CorrErParams& params, double delta) {
  detail::require(delta > 0.0 && delta < 0.5, "delta must lie in (0, 1/2)");
  const Index n = params.size();
  detail::require(n >= 2, "thresholds need at least two vertices");
  const Matrix& l = params.lambda();
  const Matrix& r = params.r();
  double eps = 0.0;
  double c = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      if (i == j) continue;
      const double var = l(i, j) * (1.0 - l(i, j));
      eps = std::max(eps, 3.0 * var + 2.0 * r(i, j));
      c = std::min(c, r(i, j) * var);
    }
  }
  if (!(c > 0.0))
    throw std::domain_error("an edgewise covariance is zero; thresholds are undefined");
  const double nd = static_cast<double>(n);
  TheoryThresholds t;
  t.c = c;
  t.epsilon = eps;
  t.delta = delta;
  t.n = n;
  t.ell = 2.0 * std::sqrt(std::pow(nd, 1.0 + 2.0 * delta)) * eps / (c * c);
  t.m = c * c * std::pow(nd, 1.0 - delta) * std::log(nd) / eps;
  return t;
}

}  // namespace gm
