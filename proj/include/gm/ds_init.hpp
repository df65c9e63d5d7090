#pragma once

// Doubly stochastic starting points built from prior correspondence
// information (seed pairs, matched partitions, similarity matrices, random
// draws) and the partition bookkeeping used by the block-disagreement study.

#include "gm/core.hpp"
#include "gm/lap.hpp"
#include "gm/random.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace gm {

// ---------------------------------------------------------------------------
// Seeds and partitions

/// One-to-one set of (row, column) seed pairs.
class SeedSet {
 public:
  SeedSet() = default;

  explicit SeedSet(std::vector<std::pair<Index, Index>> pairs) : pairs_(std::move(pairs)) {
    std::set<Index> rows;
    std::set<Index> cols;
    for (auto [i, j] : pairs_) {
      detail::require(i >= 0 && j >= 0, "seed indices must be non-negative");
      detail::require(rows.insert(i).second, "seed row " + std::to_string(i) + " repeated");
      detail::require(cols.insert(j).second, "seed column " + std::to_string(j) + " repeated");
    }
  }

  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const std::vector<std::pair<Index, Index>>& pairs() const { return pairs_; }

 private:
  std::vector<std::pair<Index, Index>> pairs_;
};

/// Seed file: one "i j" pair per line, 0-indexed.
inline SeedSet read_seed_file(std::istream& in) {
  std::vector<std::pair<Index, Index>> pairs;
  for (const Edge& e : parse_edge_list(in)) pairs.emplace_back(e.u, e.v);
  return SeedSet(std::move(pairs));
}

/// Partition of [n] stored as a part label per vertex; labels are 0..parts-1.
class Partition {
 public:
  Partition() = default;

  explicit Partition(std::vector<int> labels) : labels_(std::move(labels)) {
    int max_label = -1;
    for (int l : labels_) {
      detail::require(l >= 0, "partition labels must be non-negative");
      max_label = std::max(max_label, l);
    }
    sizes_.assign(static_cast<std::size_t>(max_label + 1), 0);
    for (int l : labels_) ++sizes_[l];
    for (Index s : sizes_) detail::require(s > 0, "partition labels must be contiguous (empty part)");
  }

  /// Consecutive blocks of the given sizes.
  static Partition blocks(std::span<const Index> sizes) {
    std::vector<int> labels;
    for (std::size_t k = 0; k < sizes.size(); ++k)
      labels.insert(labels.end(), static_cast<std::size_t>(sizes[k]), static_cast<int>(k));
    return Partition(std::move(labels));
  }

  Index size() const { return static_cast<Index>(labels_.size()); }
  int parts() const { return static_cast<int>(sizes_.size()); }
  int operator[](Index i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }
  Index part_size(int k) const { return sizes_[k]; }

  std::vector<std::vector<Index>> members() const {
    std::vector<std::vector<Index>> out(sizes_.size());
    for (Index i = 0; i < size(); ++i) out[labels_[i]].push_back(i);
    return out;
  }

  friend bool operator==(const Partition& a, const Partition& b) { return a.labels_ == b.labels_; }

 private:
  std::vector<int> labels_;
  std::vector<Index> sizes_;
};

/// Rows in part k of eta correspond to columns in part k of zeta.
class PartitionPair {
 public:
  PartitionPair(Partition eta, Partition zeta) : eta_(std::move(eta)), zeta_(std::move(zeta)) {
    detail::require_same_size(eta_.size(), zeta_.size(), "PartitionPair");
    detail::require(eta_.parts() == zeta_.parts(), "partitions must have the same number of parts");
    for (int k = 0; k < eta_.parts(); ++k)
      detail::require(eta_.part_size(k) == zeta_.part_size(k),
                      "matched parts must have equal cardinality (part " + std::to_string(k) + ")");
  }

  const Partition& eta() const { return eta_; }
  const Partition& zeta() const { return zeta_; }

 private:
  Partition eta_;
  Partition zeta_;
};

/// Sizes used by block_diag_barycenter: n/s each when s divides n, otherwise
/// s-1 blocks of floor(n/s) and one block holding the remainder.
inline std::vector<Index> diagonal_block_sizes(Index n, Index s) {
  detail::require(s >= 1 && s <= n, "block count must lie in [1, n]");
  const Index base = n / s;
  std::vector<Index> sizes(static_cast<std::size_t>(s), base);
  sizes.back() = n - (s - 1) * base;
  return sizes;
}

// ---------------------------------------------------------------------------
// Constructors

inline DoublyStochasticMatrix barycenter(Index n) {
  detail::require(n >= 1, "barycenter needs n >= 1");
  return DoublyStochasticMatrix(Matrix::Constant(n, n, 1.0 / static_cast<double>(n)));
}

/// 1 at each seed pair, 0 elsewhere in seeded rows and columns, and the
/// barycenter of the residual block.
inline DoublyStochasticMatrix soft_seed_one_to_one(Index n, const SeedSet& seeds) {
  detail::require(static_cast<Index>(seeds.size()) <= n, "more seeds than vertices");
  std::vector<char> row_seeded(n, 0);
  std::vector<char> col_seeded(n, 0);
  Matrix d = Matrix::Zero(n, n);
  for (auto [i, j] : seeds.pairs()) {
    detail::require(i < n && j < n, "seed index out of range");
    d(i, j) = 1.0;
    row_seeded[i] = 1;
    col_seeded[j] = 1;
  }
  const Index rest = n - static_cast<Index>(seeds.size());
  if (rest > 0) {
    const double fill = 1.0 / static_cast<double>(rest);
    for (Index j = 0; j < n; ++j) {
      if (col_seeded[j]) continue;
      for (Index i = 0; i < n; ++i)
        if (!row_seeded[i]) d(i, j) = fill;
    }
  }
  return DoublyStochasticMatrix(std::move(d));
}

/// D(i, j) = 1/|eta_k| for i in eta_k, j in zeta_k.
inline DoublyStochasticMatrix soft_seed_partition(const PartitionPair& pp) {
  const Index n = pp.eta().size();
  Matrix d = Matrix::Zero(n, n);
  const auto rows = pp.eta().members();
  const auto cols = pp.zeta().members();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double fill = 1.0 / static_cast<double>(rows[k].size());
    for (Index j : cols[k])
      for (Index i : rows[k]) d(i, j) = fill;
  }
  return DoublyStochasticMatrix(std::move(d));
}

/// s diagonal barycenter blocks; trace is exactly s.
inline DoublyStochasticMatrix block_diag_barycenter(Index n, Index s) {
  const auto sizes = diagonal_block_sizes(n, s);
  Matrix d = Matrix::Zero(n, n);
  Index start = 0;
  for (Index b : sizes) {
    d.block(start, start, b, b).setConstant(1.0 / static_cast<double>(b));
    start += b;
  }
  return DoublyStochasticMatrix(std::move(d));
}

struct SinkhornResult {
  DoublyStochasticMatrix matrix;
  int iterations = 0;  // row+column sweeps performed
};

struct SinkhornOptions {
  double tol = 1e-8;
  int max_iter = 10000;
};

/// Alternately rescales rows and columns to unit sums until the largest
/// row/column-sum deviation drops below tol.
inline SinkhornResult sinkhorn_knopp(const Matrix& s, SinkhornOptions opts = {}) {
  detail::require_square(s, "Sinkhorn input");
  detail::require(s.allFinite() && s.minCoeff() >= 0.0, "Sinkhorn input must be nonnegative");
  Matrix m = s;
  for (Index i = 0; i < m.rows(); ++i) {
    detail::require(m.row(i).sum() > 0.0, "Sinkhorn input has an all-zero row " + std::to_string(i));
    detail::require(m.col(i).sum() > 0.0, "Sinkhorn input has an all-zero column " + std::to_string(i));
  }
  int it = 0;
  while (doubly_stochastic_residual(m) >= opts.tol) {
    if (it == opts.max_iter)
      throw std::runtime_error("Sinkhorn-Knopp did not converge within " +
                               std::to_string(it) + " sweeps (residual " +
                               std::to_string(doubly_stochastic_residual(m)) + ")");
    m.array().colwise() /= m.rowwise().sum().array();
    m.array().rowwise() /= m.colwise().sum().array();
    ++it;
  }
  return {DoublyStochasticMatrix(std::move(m), std::max(opts.tol, DoublyStochasticMatrix::kTolerance)),
          it};
}

namespace detail {

// Closed-form projection onto {X : X 1 = 1, X^T 1 = 1}.
inline void project_unit_marginals(Matrix& x) {
  const double n = static_cast<double>(x.rows());
  const Vector r = x.rowwise().sum();
  const Vector c = x.colwise().sum().transpose();
  const double shift = (x.sum() - n) / (n * n);
  x.array().colwise() += (1.0 - r.array()) / n;
  x.array().rowwise() += ((1.0 - c.array()) / n).transpose();
  x.array() += shift;
}

}  // namespace detail

struct ProjectionOptions {
  double tol = 1e-9;
  int max_sweeps = 100000;
};

/// argmin_{D doubly stochastic} ||D - S||_F by Dykstra's alternating
/// projections between the unit-marginal affine set and the nonnegative
/// orthant. The affine set needs no correction term.
inline DoublyStochasticMatrix project_frobenius_to_ds(const Matrix& s, ProjectionOptions opts = {}) {
  detail::require_square(s, "projection input");
  detail::require(s.allFinite(), "projection input must be finite");
  if (validate_doubly_stochastic(s, opts.tol)) return DoublyStochasticMatrix(s, opts.tol);

  Matrix x = s;
  Matrix correction = Matrix::Zero(s.rows(), s.cols());
  Matrix y(s.rows(), s.cols());
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    y = x;
    detail::project_unit_marginals(y);
    Matrix z = (y + correction).cwiseMax(0.0);
    correction += y - z;
    const double change = (z - x).norm();
    x = std::move(z);
    if (change < opts.tol && doubly_stochastic_residual(x) < opts.tol)
      return DoublyStochasticMatrix(std::move(x), std::max(opts.tol, DoublyStochasticMatrix::kTolerance));
  }
  throw std::runtime_error("Frobenius projection did not converge within " +
                           std::to_string(opts.max_sweeps) + " sweeps");
}

// ---------------------------------------------------------------------------
// Similarity

/// exp(-||x - y||^2 / (2 sigma^2))
struct GaussianKernel {
  double sigma = 1.0;
  double operator()(const Vector& x, const Vector& y) const {
    return std::exp(-(x - y).squaredNorm() / (2.0 * sigma * sigma));
  }
};

/// max(<x, y>, 0)
struct ClippedInnerProduct {
  double operator()(const Vector& x, const Vector& y) const { return std::max(x.dot(y), 0.0); }
};

/// S(i, j) = kernel(X_i, Y_j) over the rows of the feature tables.
template <typename Kernel>
Matrix similarity_from_features(const Matrix& x, const Matrix& y, Kernel&& kernel) {
  detail::require_same_size(x.cols(), y.cols(), "similarity_from_features (feature dimension)");
  Matrix s(x.rows(), y.rows());
  for (Index j = 0; j < y.rows(); ++j) {
    const Vector yj = y.row(j).transpose();
    for (Index i = 0; i < x.rows(); ++i) {
      const double k = kernel(Vector(x.row(i).transpose()), yj);
      detail::require(std::isfinite(k) && k >= 0.0, "kernel values must be nonnegative and finite");
      s(i, j) = k;
    }
  }
  return s;
}

/// Numeric CSV with one header row.
inline Matrix read_csv_matrix(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("CSV input is empty");
  const auto width = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || cell.find_first_not_of(" \t", used) != std::string::npos)
        throw std::invalid_argument("non-numeric CSV cell '" + cell + "' on line " +
                                    std::to_string(line_no));
      row.push_back(value);
    }
    if (row.size() != width)
      throw std::invalid_argument("ragged CSV row on line " + std::to_string(line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("CSV input has no data rows");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return m;
}

inline Matrix read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_csv_matrix(in);
}

// ---------------------------------------------------------------------------
// Random starting points

inline Permutation random_permutation(Index n, Rng& rng) {
  std::vector<Index> sigma(n);
  std::iota(sigma.begin(), sigma.end(), Index{0});
  shuffle(sigma, rng);
  return Permutation(std::move(sigma));
}

struct RandomDsMethod {
  enum class Kind { permutation, sinkhorn_of_uniform, convex_mix };
  Kind kind = Kind::sinkhorn_of_uniform;
  int mix_count = 2;  // permutations in a convex mix

  static RandomDsMethod permutation() { return {Kind::permutation, 1}; }
  static RandomDsMethod sinkhorn_of_uniform() { return {Kind::sinkhorn_of_uniform, 1}; }
  static RandomDsMethod convex_mix(int k) { return {Kind::convex_mix, k}; }
};

inline DoublyStochasticMatrix random_doubly_stochastic(Index n, Rng& rng,
                                                       RandomDsMethod method = {}) {
  detail::require(n >= 1, "random_doubly_stochastic needs n >= 1");
  switch (method.kind) {
    case RandomDsMethod::Kind::permutation:
      return DoublyStochasticMatrix(random_permutation(n, rng));
    case RandomDsMethod::Kind::sinkhorn_of_uniform: {
      Matrix u(n, n);
      for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) u(i, j) = 1.0 - uniform01(rng);  // (0, 1]
      return sinkhorn_knopp(u, {.tol = 1e-12, .max_iter = 10000}).matrix;
    }
    case RandomDsMethod::Kind::convex_mix: {
      detail::require(method.mix_count >= 1, "convex mix needs at least one permutation");
      const auto w = sample_flat_dirichlet(static_cast<std::size_t>(method.mix_count), rng);
      Matrix d = Matrix::Zero(n, n);
      for (double wk : w) {
        const auto p = random_permutation(n, rng);
        for (Index i = 0; i < n; ++i) d(i, p[i]) += wk;
      }
      return DoublyStochasticMatrix(std::move(d));
    }
  }
  throw std::logic_error("unknown random DS method");
}

/// sum_k w_k D_k for nonnegative weights summing to 1.
inline DoublyStochasticMatrix convex_combination(std::span<const double> weights,
                                                 std::span<const DoublyStochasticMatrix> matrices) {
  detail::require(!weights.empty() && weights.size() == matrices.size(),
                  "convex_combination needs one weight per matrix");
  double total = 0.0;
  for (double w : weights) {
    detail::require(std::isfinite(w) && w >= 0.0, "convex weights must be nonnegative");
    total += w;
  }
  detail::require(std::abs(total - 1.0) <= 1e-12, "convex weights must sum to 1");
  const Index n = matrices.front().size();
  Matrix d = Matrix::Zero(n, n);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    detail::require_same_size(n, matrices[k].size(), "convex_combination");
    d += weights[k] * matrices[k].matrix();
  }
  return DoublyStochasticMatrix(std::move(d));
}

// ---------------------------------------------------------------------------
// Partition comparison

using ConfusionMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// C(i, j) = |eta_i ∩ beta_j|.
inline ConfusionMatrix confusion_matrix(const Partition& eta, const Partition& beta) {
  detail::require_same_size(eta.size(), beta.size(), "confusion_matrix");
  detail::require(eta.parts() == beta.parts(), "partitions must have the same number of parts");
  ConfusionMatrix c = ConfusionMatrix::Zero(eta.parts(), beta.parts());
  for (Index v = 0; v < eta.size(); ++v) ++c(eta[v], beta[v]);
  return c;
}

/// n minus the largest diagonal mass of C over relabelings of the parts.
inline std::int64_t disagreement(const Partition& eta, const Partition& beta) {
  const ConfusionMatrix c = confusion_matrix(eta, beta);
  const Matrix w = c.cast<double>();
  const Permutation best = solve_lap_max(w);
  std::int64_t matched = 0;
  for (Index k = 0; k < best.size(); ++k) matched += c(k, best[k]);
  return static_cast<std::int64_t>(eta.size()) - matched;
}

/// Partition eta whose confusion matrix against beta is
/// ((n - delta)/K) I + (delta / (K(K-1))) (J - I). beta must have K equal
/// parts; moved vertices are chosen uniformly at random.
inline Partition sample_partition_with_confusion(Index n, int k, Index delta, const Partition& beta,
                                                 Rng& rng) {
  detail::require(k >= 2, "need at least two parts");
  detail::require_same_size(n, beta.size(), "sample_partition_with_confusion");
  detail::require(beta.parts() == k, "reference partition must have K parts");
  detail::require(n % k == 0, "K must divide n");
  for (int j = 0; j < k; ++j)
    detail::require(beta.part_size(j) == n / k, "reference partition parts must have size n/K");
  detail::require(delta >= 0 && delta <= n - n / k, "delta must lie in [0, n - n/K]");
  detail::require(delta % (static_cast<Index>(k) * (k - 1)) == 0, "K(K-1) must divide delta");

  const Index keep = (n - delta) / k;
  const Index spread = delta / (static_cast<Index>(k) * (k - 1));
  std::vector<int> labels(n, -1);
  auto parts = beta.members();
  for (int j = 0; j < k; ++j) {
    auto& members = parts[j];
    shuffle(members, rng);
    std::size_t pos = 0;
    for (Index t = 0; t < keep; ++t) labels[members[pos++]] = j;
    for (int i = 0; i < k; ++i) {
      if (i == j) continue;
      for (Index t = 0; t < spread; ++t) labels[members[pos++]] = i;
    }
  }
  return Partition(std::move(labels));
}

}  // namespace gm
