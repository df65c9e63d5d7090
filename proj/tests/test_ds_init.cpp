#include "oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace gm;

namespace {

constexpr double kTol = 1e-8;

bool is_ds(const DoublyStochasticMatrix& d) { return validate_doubly_stochastic(d.matrix(), kTol); }

}  // namespace

TEST(Barycenter, Basics) {
  for (Index n : {1, 2, 7, 50}) {
    const auto d = barycenter(n);
    EXPECT_TRUE(is_ds(d));
    EXPECT_NEAR(d.trace(), 1.0, 1e-12);
  }
  EXPECT_EQ(barycenter(1).matrix()(0, 0), 1.0);
  EXPECT_THROW(barycenter(0), std::invalid_argument);
}

TEST(SoftSeeds, OneToOne) {
  const auto d = soft_seed_one_to_one(4, SeedSet({{1, 1}, {2, 2}}));
  EXPECT_TRUE(is_ds(d));
  EXPECT_DOUBLE_EQ(d.trace(), 3.0);
  EXPECT_EQ(d.matrix()(1, 1), 1.0);
  EXPECT_EQ(d.matrix()(1, 0), 0.0);
  EXPECT_EQ(d.matrix()(0, 3), 0.5);

  std::vector<std::pair<Index, Index>> all;
  for (Index i = 0; i < 5; ++i) all.emplace_back(i, i);
  EXPECT_EQ(soft_seed_one_to_one(5, SeedSet(all)).matrix(), Matrix::Identity(5, 5));
  EXPECT_EQ(soft_seed_one_to_one(5, SeedSet()).matrix(), barycenter(5).matrix());

  EXPECT_THROW(SeedSet({{0, 1}, {0, 2}}), std::invalid_argument);
  EXPECT_THROW(SeedSet({{0, 1}, {2, 1}}), std::invalid_argument);
  EXPECT_THROW(soft_seed_one_to_one(3, SeedSet({{0, 3}})), std::invalid_argument);
}

TEST(SoftSeeds, DiagonalSeedsGiveAtLeastSeedCountTrace) {
  Rng rng = make_rng(2);
  for (int t = 0; t < 30; ++t) {
    const Index n = 3 + static_cast<Index>(uniform_index(rng, 20));
    const auto p = random_permutation(n, rng);
    const Index k = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    std::vector<std::pair<Index, Index>> seeds;
    for (Index i = 0; i < k; ++i) seeds.emplace_back(p[i], p[i]);
    const auto d = soft_seed_one_to_one(n, SeedSet(seeds));
    EXPECT_TRUE(is_ds(d));
    EXPECT_GE(d.trace(), static_cast<double>(k) - 1e-12);
  }
}

TEST(SoftSeeds, SeedFileParsing) {
  std::istringstream in("# seeds\n0 2\n1 0\n");
  const auto seeds = read_seed_file(in);
  ASSERT_EQ(seeds.size(), 2u);
  EXPECT_EQ(seeds.pairs()[0], (std::pair<Index, Index>{0, 2}));
}

TEST(SoftSeeds, Partitions) {
  const Partition matched = Partition::blocks(std::vector<Index>{2, 3, 1});
  const auto d = soft_seed_partition(PartitionPair(matched, matched));
  EXPECT_TRUE(is_ds(d));
  EXPECT_NEAR(d.trace(), 3.0, 1e-12);

  const Partition one(std::vector<int>(6, 0));
  EXPECT_EQ(soft_seed_partition(PartitionPair(one, one)).matrix(), barycenter(6).matrix());

  const Partition eta(std::vector<int>{0, 0, 1, 1});
  const Partition zeta(std::vector<int>{1, 1, 0, 0});
  EXPECT_EQ(soft_seed_partition(PartitionPair(eta, zeta)).trace(), 0.0);

  EXPECT_THROW(PartitionPair(Partition(std::vector<int>{0, 0, 1}), Partition(std::vector<int>{0, 1, 1})),
               std::invalid_argument);
  EXPECT_THROW(Partition(std::vector<int>{0, 2}), std::invalid_argument);
}

TEST(BlockDiagonal, Shapes) {
  const auto d = block_diag_barycenter(300, 6);
  EXPECT_TRUE(is_ds(d));
  EXPECT_NEAR(d.trace(), 6.0, 1e-12);
  EXPECT_DOUBLE_EQ(d.matrix()(49, 0), 0.02);
  EXPECT_EQ(d.matrix()(50, 0), 0.0);

  EXPECT_EQ(block_diag_barycenter(9, 1).matrix(), barycenter(9).matrix());

  EXPECT_EQ(diagonal_block_sizes(10, 4), (std::vector<Index>{2, 2, 2, 4}));
  const auto uneven = block_diag_barycenter(10, 4);
  EXPECT_TRUE(is_ds(uneven));
  EXPECT_NEAR(uneven.trace(), 4.0, 1e-12);
  EXPECT_DOUBLE_EQ(uneven.matrix()(9, 6), 0.25);

  EXPECT_THROW(block_diag_barycenter(5, 0), std::invalid_argument);
  EXPECT_THROW(block_diag_barycenter(5, 6), std::invalid_argument);
}

TEST(BlockDiagonal, TraceEqualsBlockCountEverywhere) {
  for (Index n = 1; n <= 40; ++n)
    for (Index s = 1; s <= n; ++s) {
      const auto d = block_diag_barycenter(n, s);
      ASSERT_NEAR(d.trace(), static_cast<double>(s), 1e-9) << n << ' ' << s;
    }
}

TEST(Sinkhorn, FixedPointAndDiagonal) {
  const Matrix ds = barycenter(4).matrix();
  const auto same = sinkhorn_knopp(ds);
  EXPECT_EQ(same.iterations, 0);
  EXPECT_EQ(same.matrix.matrix(), ds);

  Matrix diag = Matrix::Zero(2, 2);
  diag(0, 0) = 2.0;
  diag(1, 1) = 3.0;
  EXPECT_EQ(sinkhorn_knopp(diag).matrix.matrix(), Matrix::Identity(2, 2));
}

TEST(Sinkhorn, PositiveMatricesBalance) {
  Rng rng = make_rng(10);
  for (Index n : {10, 50}) {
    Matrix s(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) s(i, j) = 0.01 + uniform01(rng);
    const auto r = sinkhorn_knopp(s, {.tol = 1e-8, .max_iter = 10000});
    EXPECT_TRUE(validate_doubly_stochastic(r.matrix.matrix(), 1e-8));
    EXPECT_LE(r.iterations, 10000);
  }
}

TEST(Sinkhorn, Errors) {
  Matrix zero_row = Matrix::Ones(3, 3);
  zero_row.row(1).setZero();
  EXPECT_THROW(sinkhorn_knopp(zero_row), std::invalid_argument);
  EXPECT_THROW(sinkhorn_knopp(-Matrix::Ones(2, 2)), std::invalid_argument);
  // Lacks total support, so balancing only creeps toward I.
  Matrix unsupported(2, 2);
  unsupported << 1, 1, 0, 1;
  EXPECT_THROW(sinkhorn_knopp(unsupported, {.tol = 1e-12, .max_iter = 50}), std::runtime_error);
}

TEST(Projection, FeasiblePointIsFixed) {
  Rng rng = make_rng(3);
  const auto d = random_doubly_stochastic(6, rng);
  EXPECT_EQ(project_frobenius_to_ds(d.matrix()).matrix(), d.matrix());
  EXPECT_EQ(project_frobenius_to_ds(d.matrix()).matrix(), sinkhorn_knopp(d.matrix()).matrix.matrix());
}

TEST(Projection, MatchesExactOracleAtThree) {
  Rng rng = make_rng(13);
  for (int t = 0; t < 40; ++t) {
    Matrix s(3, 3);
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 3; ++j) s(i, j) = 2.0 * standard_normal(rng);
    const Matrix exact = oracle::exact_ds_projection(s);
    const Matrix ours = project_frobenius_to_ds(s).matrix();
    EXPECT_LT((exact - ours).norm(), 1e-5) << s;
  }
}

TEST(Projection, IdempotentAndShiftInvariant) {
  Rng rng = make_rng(14);
  for (int t = 0; t < 20; ++t) {
    Matrix s(8, 8);
    for (Index i = 0; i < 8; ++i)
      for (Index j = 0; j < 8; ++j) s(i, j) = standard_normal(rng);
    const Matrix once = project_frobenius_to_ds(s).matrix();
    EXPECT_TRUE(validate_doubly_stochastic(once, 1e-8));
    EXPECT_LT((project_frobenius_to_ds(once).matrix() - once).cwiseAbs().maxCoeff(), 1e-7);
    const double c = 3.0 * standard_normal(rng);
    const Matrix shifted = project_frobenius_to_ds((s.array() + c).matrix()).matrix();
    EXPECT_LT((shifted - once).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(Similarity, Kernels) {
  Rng rng = make_rng(15);
  Matrix x(5, 3);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 3; ++j) x(i, j) = standard_normal(rng);
  const Matrix s = similarity_from_features(x, x, GaussianKernel{0.7});
  for (Index i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(s(i, i), 1.0);
    EXPECT_LE(s.row(i).maxCoeff(), 1.0);
  }

  const Matrix ones = similarity_from_features(x, x, [](const Vector&, const Vector&) { return 1.0; });
  EXPECT_LT((project_frobenius_to_ds(ones).matrix() - barycenter(5).matrix()).norm(), 1e-9);

  // One-hot features: row sigma(i) of Y is e_i.
  const Permutation sigma(std::vector<Index>{2, 0, 3, 1});
  const Matrix onehot_x = Matrix::Identity(4, 4);
  Matrix onehot_y = Matrix::Zero(4, 4);
  for (Index i = 0; i < 4; ++i) onehot_y(sigma[i], i) = 1.0;
  const Matrix pattern = similarity_from_features(onehot_x, onehot_y, ClippedInnerProduct{});
  EXPECT_EQ(pattern, sigma.matrix());
}

TEST(Similarity, CsvReading) {
  std::istringstream in("a,b\n1,2.5\n0,3\n");
  const Matrix m = read_csv_matrix(in);
  ASSERT_EQ(m.rows(), 2);
  EXPECT_EQ(m(0, 1), 2.5);
  std::istringstream ragged("a,b\n1\n");
  EXPECT_THROW(read_csv_matrix(ragged), std::invalid_argument);
}

TEST(RandomDs, Methods) {
  Rng rng = make_rng(16);
  const auto p = random_doubly_stochastic(12, rng, RandomDsMethod::permutation());
  EXPECT_TRUE(is_permutation_matrix(p.matrix()));
  for (auto method : {RandomDsMethod::sinkhorn_of_uniform(), RandomDsMethod::convex_mix(4)}) {
    for (int t = 0; t < 10; ++t) EXPECT_TRUE(is_ds(random_doubly_stochastic(12, rng, method)));
  }
}

TEST(RandomDs, PermutationTraceAveragesOne) {
  Rng rng = make_rng(17);
  const int draws = 10000;
  double sum = 0.0;
  for (int t = 0; t < draws; ++t) sum += static_cast<double>(random_permutation(20, rng).fixed_points());
  // Fixed points of a uniform permutation: mean 1, variance 1.
  EXPECT_NEAR(sum / draws, 1.0, 3.0 / std::sqrt(static_cast<double>(draws)));
}

TEST(ConvexCombination, Traces) {
  const DoublyStochasticMatrix id(Permutation::identity(5));
  const std::vector<double> single{1.0};
  EXPECT_EQ(convex_combination(single, std::vector{id}).matrix(), id.matrix());

  const double a = 0.3;
  const std::vector<double> w{a, 1.0 - a};
  EXPECT_NEAR(convex_combination(w, std::vector{id, barycenter(5)}).trace(), a * 5 + (1 - a), 1e-12);

  const DoublyStochasticMatrix swap(Permutation(std::vector<Index>{1, 0, 2, 3, 4}));
  const std::vector<double> half{0.5, 0.5};
  EXPECT_NEAR(convex_combination(half, std::vector{id, swap}).trace(), 4.0, 1e-12);

  const std::vector<double> bad{0.6, 0.6};
  EXPECT_THROW(convex_combination(bad, std::vector{id, swap}), std::invalid_argument);
}

TEST(Partitions, ConfusionAndDisagreement) {
  const Partition beta = Partition::blocks(std::vector<Index>{3, 3, 3});
  EXPECT_EQ(disagreement(beta, beta), 0);
  const Partition relabeled(std::vector<int>{2, 2, 2, 0, 0, 0, 1, 1, 1});
  EXPECT_EQ(disagreement(relabeled, beta), 0);
  const auto c = confusion_matrix(relabeled, beta);
  EXPECT_EQ(c(2, 0), 3);
  EXPECT_EQ(c.sum(), 9);
  EXPECT_THROW(confusion_matrix(Partition(std::vector<int>{0, 1, 0}), Partition(std::vector<int>{0, 0, 0})),
               std::invalid_argument);
}

TEST(Partitions, SampledConfusionHitsTarget) {
  Rng rng = make_rng(18);
  const Partition beta = Partition::blocks(std::vector<Index>(5, 60));
  for (Index delta = 0; delta <= 240; delta += 20) {
    const Partition eta = sample_partition_with_confusion(300, 5, delta, beta, rng);
    const auto c = confusion_matrix(eta, beta);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) ASSERT_EQ(c(i, j), i == j ? (300 - delta) / 5 : delta / 20) << delta;
    // Brute force over all 120 relabelings.
    const auto best = oracle::brute_force_max(5, [&](const std::vector<Index>& s) {
      double v = 0.0;
      for (int k = 0; k < 5; ++k) v += static_cast<double>(c(k, s[k]));
      return v;
    });
    EXPECT_EQ(disagreement(eta, beta), 300 - static_cast<std::int64_t>(best.value));
    EXPECT_EQ(disagreement(eta, beta), delta);
    EXPECT_EQ(disagreement(beta, eta), disagreement(eta, beta));
  }
}

TEST(Partitions, SixtyKeepsFortyEight) {
  Rng rng = make_rng(19);
  const Partition beta = Partition::blocks(std::vector<Index>(5, 60));
  const Partition eta = sample_partition_with_confusion(300, 5, 60, beta, rng);
  for (int j = 0; j < 5; ++j) {
    std::vector<int> sent(5, 0);
    for (Index v = 0; v < 300; ++v)
      if (beta[v] == j) ++sent[eta[v]];
    for (int i = 0; i < 5; ++i) EXPECT_EQ(sent[i], i == j ? 48 : 3);
  }
  EXPECT_EQ(sample_partition_with_confusion(300, 5, 0, beta, rng), beta);
}

TEST(Partitions, RejectsIndivisibleInputs) {
  Rng rng = make_rng(20);
  const Partition beta = Partition::blocks(std::vector<Index>(5, 60));
  EXPECT_THROW(sample_partition_with_confusion(300, 5, 30, beta, rng), std::invalid_argument);
  EXPECT_THROW(sample_partition_with_confusion(300, 5, 260, beta, rng), std::invalid_argument);
  EXPECT_THROW(sample_partition_with_confusion(300, 4, 0, beta, rng), std::invalid_argument);
}
