#pragma once

// Matrix types shared by the whole toolkit: adjacency matrices of simple
// graphs, permutations, doubly stochastic matrices, plus the graph-matching
// objectives and accuracy metrics.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct Edge {
  Index u;
  Index v;
  friend bool operator==(const Edge&, const Edge&) = default;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

inline void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols())
    throw std::invalid_argument(std::string(what) + " must be square");
}

inline void require_same_size(Index a, Index b, const char* what) {
  if (a != b)
    throw std::invalid_argument(std::string("dimension mismatch in ") + what +
                                ": " + std::to_string(a) + " vs " +
                                std::to_string(b));
}

}  // namespace detail

/// Symmetric, hollow 0/1 matrix of a simple undirected graph.
class AdjacencyMatrix {
 public:
  AdjacencyMatrix() = default;

  explicit AdjacencyMatrix(Matrix entries) : m_(std::move(entries)) {
    detail::require_square(m_, "adjacency matrix");
    for (Index j = 0; j < m_.cols(); ++j) {
      for (Index i = 0; i < m_.rows(); ++i) {
        const double x = m_(i, j);
        detail::require(x == 0.0 || x == 1.0, "adjacency entries must be 0 or 1");
        detail::require(x == m_(j, i), "adjacency matrix must be symmetric");
      }
      detail::require(m_(j, j) == 0.0, "adjacency matrix must be hollow (no self-loops)");
    }
  }

  static AdjacencyMatrix empty(Index n) { return AdjacencyMatrix(Matrix::Zero(n, n), Trusted{}); }

  static AdjacencyMatrix from_edges(Index n, std::span<const Edge> edges) {
    Matrix m = Matrix::Zero(n, n);
    for (const Edge& e : edges) {
      detail::require(e.u >= 0 && e.u < n && e.v >= 0 && e.v < n,
                      "edge endpoint out of range: " + std::to_string(e.u) + " " +
                          std::to_string(e.v));
      detail::require(e.u != e.v, "self-loop " + std::to_string(e.u) + " rejected");
      detail::require(m(e.u, e.v) == 0.0, "duplicate edge " + std::to_string(e.u) + " " +
                                              std::to_string(e.v));
      m(e.u, e.v) = 1.0;
      m(e.v, e.u) = 1.0;
    }
    return AdjacencyMatrix(std::move(m), Trusted{});
  }

  Index size() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

  std::int64_t edge_count() const {
    return static_cast<std::int64_t>(std::llround(m_.sum())) / 2;
  }

  /// Edges with u < v, in row-major order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (Index u = 0; u < size(); ++u)
      for (Index v = u + 1; v < size(); ++v)
        if (m_(u, v) != 0.0) out.push_back({u, v});
    return out;
  }

  friend bool operator==(const AdjacencyMatrix& a, const AdjacencyMatrix& b) {
    return a.m_.rows() == b.m_.rows() && a.m_ == b.m_;
  }

 private:
  struct Trusted {};
  AdjacencyMatrix(Matrix m, Trusted) : m_(std::move(m)) {}

  // Samplers build matrices that are correct by construction.
  friend class AdjacencyBuilder;

  Matrix m_;
};

/// Builds an adjacency matrix edge by edge without re-validating at the end.
class AdjacencyBuilder {
 public:
  explicit AdjacencyBuilder(Index n) : m_(Matrix::Zero(n, n)) {}
  void add_edge(Index u, Index v) {
    m_(u, v) = 1.0;
    m_(v, u) = 1.0;
  }
  AdjacencyMatrix build() && { return AdjacencyMatrix(std::move(m_), AdjacencyMatrix::Trusted{}); }

 private:
  Matrix m_;
};

/// Bijection on {0..n-1}; as a matrix, P(i, sigma[i]) = 1.
class Permutation {
 public:
  Permutation() = default;

  explicit Permutation(std::vector<Index> sigma) : sigma_(std::move(sigma)) {
    std::vector<char> seen(sigma_.size(), 0);
    for (Index s : sigma_) {
      detail::require(s >= 0 && s < static_cast<Index>(sigma_.size()),
                      "permutation image out of range");
      detail::require(!seen[s], "permutation is not a bijection");
      seen[s] = 1;
    }
  }

  static Permutation identity(Index n) {
    std::vector<Index> s(n);
    for (Index i = 0; i < n; ++i) s[i] = i;
    return Permutation(std::move(s), Trusted{});
  }

  /// Recovers the permutation from a 0/1 matrix; throws if it is not one.
  static Permutation from_matrix(const Matrix& m) {
    detail::require_square(m, "permutation matrix");
    std::vector<Index> s(m.rows(), -1);
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        const double x = m(i, j);
        detail::require(x == 0.0 || x == 1.0, "permutation matrix entries must be 0 or 1");
        if (x == 1.0) {
          detail::require(s[i] < 0, "permutation matrix row has more than one 1");
          s[i] = j;
        }
      }
      detail::require(s[i] >= 0, "permutation matrix row has no 1");
    }
    return Permutation(std::move(s));
  }

  Index size() const { return static_cast<Index>(sigma_.size()); }
  Index operator[](Index i) const { return sigma_[i]; }
  const std::vector<Index>& sigma() const { return sigma_; }

  Index fixed_points() const {
    Index count = 0;
    for (Index i = 0; i < size(); ++i) count += sigma_[i] == i;
    return count;
  }

  Permutation inverse() const {
    std::vector<Index> inv(sigma_.size());
    for (Index i = 0; i < size(); ++i) inv[sigma_[i]] = i;
    return Permutation(std::move(inv), Trusted{});
  }

  /// (this ∘ other)(i) = this[other[i]]
  Permutation compose(const Permutation& other) const {
    detail::require_same_size(size(), other.size(), "Permutation::compose");
    std::vector<Index> out(sigma_.size());
    for (Index i = 0; i < size(); ++i) out[i] = sigma_[other[i]];
    return Permutation(std::move(out), Trusted{});
  }

  Matrix matrix() const {
    Matrix m = Matrix::Zero(size(), size());
    for (Index i = 0; i < size(); ++i) m(i, sigma_[i]) = 1.0;
    return m;
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;
  friend auto operator<=>(const Permutation& a, const Permutation& b) {
    return a.sigma_ <=> b.sigma_;
  }

 private:
  struct Trusted {};
  Permutation(std::vector<Index> sigma, Trusted) : sigma_(std::move(sigma)) {}

  std::vector<Index> sigma_;
};

/// True iff every entry is >= -tol and every row and column sums to 1 within tol.
inline bool validate_doubly_stochastic(const Matrix& m, double tol) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if (!m.allFinite()) return false;
  if (m.minCoeff() < -tol) return false;
  const Vector rows = m.rowwise().sum();
  const Vector cols = m.colwise().sum().transpose();
  return (rows.array() - 1.0).abs().maxCoeff() <= tol &&
         (cols.array() - 1.0).abs().maxCoeff() <= tol;
}

/// Largest deviation of a row or column sum from 1.
inline double doubly_stochastic_residual(const Matrix& m) {
  const double r = (m.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double c = (m.colwise().sum().array() - 1.0).abs().maxCoeff();
  return std::max(r, c);
}

/// Element of the Birkhoff polytope.
class DoublyStochasticMatrix {
 public:
  static constexpr double kTolerance = 1e-9;

  DoublyStochasticMatrix() = default;

  explicit DoublyStochasticMatrix(Matrix m, double tol = kTolerance) : m_(std::move(m)) {
    detail::require_square(m_, "doubly stochastic matrix");
    detail::require(validate_doubly_stochastic(m_, tol),
                    "matrix is not doubly stochastic (residual " +
                        std::to_string(doubly_stochastic_residual(m_)) + ")");
  }

  explicit DoublyStochasticMatrix(const Permutation& p) : m_(p.matrix()) {}

  Index size() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }
  double trace() const { return m_.trace(); }

 private:
  Matrix m_;
};

// ---------------------------------------------------------------------------
// Objectives

/// Number of ordered pairs (i, j) with A(i,j) != B(sigma(i), sigma(j)), i.e.
/// ||A - P B P^T||_F^2 computed exactly.
inline std::int64_t gm_edit_count(const AdjacencyMatrix& a, const AdjacencyMatrix& b,
                                  const Permutation& p) {
  detail::require_same_size(a.size(), b.size(), "gm_edit_count");
  detail::require_same_size(a.size(), p.size(), "gm_edit_count");
  std::int64_t count = 0;
  const Index n = a.size();
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) count += a(i, j) != b(p[i], p[j]);
  return count;
}

inline double gm_edit_objective(const AdjacencyMatrix& a, const AdjacencyMatrix& b,
                                const Permutation& p) {
  return static_cast<double>(gm_edit_count(a, b, p));
}

/// trace(A P B P^T) = sum_ij A(i,j) B(sigma(i), sigma(j)), exact for 0/1 inputs.
inline std::int64_t permuted_overlap(const AdjacencyMatrix& a, const AdjacencyMatrix& b,
                                     const Permutation& p) {
  detail::require_same_size(a.size(), b.size(), "permuted_overlap");
  detail::require_same_size(a.size(), p.size(), "permuted_overlap");
  std::int64_t total = 0;
  const Index n = a.size();
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      total += static_cast<std::int64_t>(a(i, j) * b(p[i], p[j]));
  return total;
}

/// trace(A P B P^T) for real matrices.
inline double permuted_overlap(const Matrix& a, const Matrix& b, const Permutation& p) {
  double total = 0.0;
  const Index n = a.rows();
  for (Index j = 0; j < n; ++j) {
    const Index pj = p[j];
    for (Index i = 0; i < n; ++i) total += a(i, j) * b(p[i], pj);
  }
  return total;
}

/// trace(A D B D^T).
inline double trace_objective(const Matrix& a, const Matrix& b, const Matrix& d) {
  detail::require_same_size(a.rows(), b.rows(), "trace_objective");
  detail::require_same_size(a.rows(), d.rows(), "trace_objective");
  detail::require_square(d, "trace_objective argument");
  const Matrix adb = a * d * b;
  return adb.cwiseProduct(d).sum();
}

inline double trace_objective(const AdjacencyMatrix& a, const AdjacencyMatrix& b,
                              const DoublyStochasticMatrix& d) {
  return trace_objective(a.matrix(), b.matrix(), d.matrix());
}

inline double trace_objective(const AdjacencyMatrix& a, const AdjacencyMatrix& b,
                              const Permutation& p) {
  return static_cast<double>(permuted_overlap(a, b, p));
}

// ---------------------------------------------------------------------------
// Metrics. The true correspondence is the identity by convention.

inline double accuracy(const Matrix& m) {
  detail::require_square(m, "accuracy argument");
  return m.trace() / static_cast<double>(m.rows());
}
inline double accuracy(const DoublyStochasticMatrix& d) { return accuracy(d.matrix()); }
inline double accuracy(const Permutation& p) {
  return static_cast<double>(p.fixed_points()) / static_cast<double>(p.size());
}

inline double loss(const Matrix& d) {
  detail::require_square(d, "loss argument");
  return static_cast<double>(d.rows()) - d.trace();
}
inline double loss(const DoublyStochasticMatrix& d) { return loss(d.matrix()); }
inline double loss(const Permutation& p) {
  return static_cast<double>(p.size() - p.fixed_points());
}

// ---------------------------------------------------------------------------
// Edge-list text format: one "u v" pair per line, 0-indexed. Blank lines and
// lines starting with '#' are skipped.

inline std::vector<Edge> parse_edge_list(std::istream& in) {
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    long long u = 0;
    long long v = 0;
    std::string rest;
    if (!(fields >> u >> v) || (fields >> rest) || u < 0 || v < 0)
      throw std::invalid_argument("malformed edge on line " + std::to_string(line_no) +
                                  ": '" + line + "'");
    edges.push_back({static_cast<Index>(u), static_cast<Index>(v)});
  }
  return edges;
}

/// One past the largest vertex index mentioned, or 0 for an empty list.
inline Index vertex_count(std::span<const Edge> edges) {
  Index n = 0;
  for (const Edge& e : edges) n = std::max({n, e.u + 1, e.v + 1});
  return n;
}

inline AdjacencyMatrix read_edge_list(std::istream& in, Index n = -1) {
  const auto edges = parse_edge_list(in);
  if (n < 0) n = vertex_count(edges);
  return AdjacencyMatrix::from_edges(n, edges);
}

inline void write_edge_list(std::ostream& out, const AdjacencyMatrix& a) {
  for (const Edge& e : a.edges()) out << e.u << ' ' << e.v << '\n';
}

}  // namespace gm
