#include "sbc/parallel.hpp"
#include "sbc/stochastics.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <bit>
#include <random>

using namespace sbc;
using Eigen::Index;
using Vec = Eigen::VectorXd;

namespace {

AdaptedField random_field(Index width, int last, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  AdaptedField f(width, last);
  for (Index i = 0; i < f.data().size(); ++i) f.data().data()[i] = g(rng);
  return f;
}

}  // namespace

TEST(BinomialTree, Shape) {
  const BinomialTree tree(1.0, 5);
  EXPECT_EQ(tree.num_nodes(), (Index(1) << 6) - 1);
  EXPECT_EQ(tree.num_nonleaf(), (Index(1) << 5) - 1);
  EXPECT_DOUBLE_EQ(tree.dt(), 0.2);
  EXPECT_DOUBLE_EQ(tree.sqrt_dt(), std::sqrt(0.2));
  for (int k = 0; k < 5; ++k) {
    for (Index j = 0; j < BinomialTree::level_size(k); ++j) {
      const Index up = BinomialTree::child(j, true), down = BinomialTree::child(j, false);
      EXPECT_NE(up, down);
      EXPECT_NEAR(tree.brownian(k + 1, up) - tree.brownian(k, j), tree.sqrt_dt(), 1e-14);
      EXPECT_NEAR(tree.brownian(k + 1, down) - tree.brownian(k, j), -tree.sqrt_dt(), 1e-14);
    }
  }
  EXPECT_EQ(tree.brownian(0, 0), 0.0);
}

TEST(BinomialTree, DepthGuard) {
  EXPECT_NO_THROW(BinomialTree(1.0, 14));
  EXPECT_THROW(BinomialTree(1.0, 15), InvalidArgument);
  EXPECT_NO_THROW(BinomialTree(1.0, 15, true));
  EXPECT_THROW(BinomialTree(1.0, 41, true), InvalidArgument);
  EXPECT_THROW(BinomialTree(1.0, 0), InvalidArgument);
  EXPECT_THROW(BinomialTree(0.0, 4), InvalidArgument);
}

TEST(CondExpect, Examples) {
  AdaptedField f(3, 1);
  const Vec v = Vec::LinSpaced(3, 1.0, 3.0);
  f.at(1, 0) = v;
  f.at(1, 1) = v;
  EXPECT_EQ(cond_expect(f, 0, 0), v);
  f.at(1, 1) = -v;
  EXPECT_EQ(cond_expect(f, 0, 0), Vec::Zero(3));
  EXPECT_THROW(cond_expect(f, 1, 0), InvalidArgument);
  const BinomialTree tree(1.0, 1);
  EXPECT_THROW(martingale_part(f, tree, 1, 0), InvalidArgument);
}

TEST(CondExpect, MatchesPathEnumeration) {
  const int n = 5;
  const AdaptedField f = random_field(2, n, 99);
  for (int k = 0; k < n; ++k) {
    for (Index j = 0; j < BinomialTree::level_size(k); ++j) {
      // iterate conditional expectations from the leaves up to (k, j)
      AdaptedField g = f;
      for (int m = n - 1; m >= k; --m)
        for (Index i = 0; i < BinomialTree::level_size(m); ++i) g.at(m, i) = cond_expect(g, m, i);
      // leaves below (k, j) are the contiguous block j * 2^(n-k) ...
      const Index span = Index(1) << (n - k);
      Vec avg = Vec::Zero(2);
      for (Index leaf = j * span; leaf < (j + 1) * span; ++leaf) avg += f.at(n, leaf);
      avg /= double(span);
      EXPECT_LT((g.at(k, j) - avg).cwiseAbs().maxCoeff(), 1e-14);
    }
  }
}

TEST(MartingalePart, BrownianRepresentations) {
  const BinomialTree tree(2.0, 4);
  const AdaptedField W = brownian_field(tree);
  AdaptedField W2(1, 4);
  for (int k = 0; k <= 4; ++k)
    for (Index j = 0; j < BinomialTree::level_size(k); ++j) W2.at(k, j)(0) = std::pow(W.at(k, j)(0), 2);
  for (int k = 0; k < 4; ++k) {
    for (Index j = 0; j < BinomialTree::level_size(k); ++j) {
      EXPECT_NEAR(martingale_part(W, tree, k, j)(0), 1.0, 1e-14);
      EXPECT_NEAR(martingale_part(W2, tree, k, j)(0), 2.0 * W.at(k, j)(0), 1e-13);
    }
  }
  AdaptedField same(2, 1);
  same.at(1, 0).setConstant(3.0);
  same.at(1, 1).setConstant(3.0);
  EXPECT_EQ(martingale_part(same, tree, 0, 0), Vec::Zero(2));
}

TEST(TreeExpectation, Examples) {
  const BinomialTree tree(1.0, 6);
  const AdaptedField W = brownian_field(tree);
  AdaptedField W2(1, 6), up(1, 6);
  for (int k = 0; k <= 6; ++k) {
    for (Index j = 0; j < BinomialTree::level_size(k); ++j) {
      W2.at(k, j)(0) = std::pow(W.at(k, j)(0), 2);
      up.at(k, j)(0) = j == 0 ? 1.0 : 0.0;  // j = 0 is the all-up path
    }
    EXPECT_NEAR(tree_expectation(W, k), 0.0, 1e-14);
    EXPECT_NEAR(tree_expectation(W2, k), k * tree.dt(), 1e-13);
    EXPECT_DOUBLE_EQ(tree_expectation(up, k), std::ldexp(1.0, -k));
  }
  EXPECT_THROW(tree_expectation(AdaptedField(2, 1), 0), DimensionMismatch);
}

TEST(TreeExpectation, TowerProperty) {
  const AdaptedField f = random_field(1, 6, 5);
  for (int k = 0; k < 6; ++k) {
    AdaptedField lifted(1, k);
    for (Index j = 0; j < BinomialTree::level_size(k); ++j) lifted.at(k, j) = cond_expect(f, k, j);
    EXPECT_NEAR(tree_expectation(lifted, k), tree_expectation(f, k + 1), 1e-14);
  }
}

TEST(TreeExpectation, ItoIsometry) {
  const int n = 6;
  const BinomialTree tree(1.5, n);
  const AdaptedField Z = random_field(1, n - 1, 17);
  // I at level k+1 = I at parent + Z_k * dW
  AdaptedField I(1, n);
  for (int k = 0; k < n; ++k)
    for (Index j = 0; j < BinomialTree::level_size(k); ++j)
      for (bool upward : {true, false})
        I.at(k + 1, BinomialTree::child(j, upward))(0) =
            I.at(k, j)(0) + Z.at(k, j)(0) * (upward ? 1.0 : -1.0) * tree.sqrt_dt();
  AdaptedField I2 = I;
  I2.data() = I.data().array().square().matrix();
  AdaptedField Z2 = Z;
  Z2.data() = Z.data().array().square().matrix();
  double rhs = 0.0;
  for (int k = 0; k < n; ++k) rhs += tree_expectation(Z2, k) * tree.dt();
  EXPECT_NEAR(tree_expectation(I2, n), rhs, 1e-12 * rhs);
}

TEST(AdaptedField, AccessIsNodeLocal) {
  AdaptedField f(2, 3);
  EXPECT_THROW(f.at(4, 0), InvalidArgument);
  EXPECT_THROW(f.at(2, 4), InvalidArgument);
  EXPECT_THROW(f.at(-1, 0), InvalidArgument);
  EXPECT_THROW(f.level(4), InvalidArgument);
  EXPECT_THROW(AdaptedField(-1, 2), InvalidArgument);
  // writing one node leaves its sibling untouched
  f.at(2, 1).setConstant(5.0);
  EXPECT_EQ(f.at(2, 0), Vec::Zero(2));
  EXPECT_EQ(f.at(2, 2), Vec::Zero(2));
  EXPECT_EQ(level_mean(f, 2), Vec::Constant(2, 1.25));
}

TEST(Parallel, CoversRangeAndRethrows) {
  for (int threads : {1, 3}) {
    set_num_threads(threads);
    std::vector<std::atomic<int>> hits(100);
    parallel_for(0, 100, [&](Index i) { hits[static_cast<size_t>(i)]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
    EXPECT_THROW(parallel_for(0, 10, [](Index i) {
                   if (i == 7) throw InvalidArgument("boom");
                 }),
                 InvalidArgument);
    // nested regions run inline
    std::atomic<int> count{0};
    parallel_for(0, 4, [&](Index) { parallel_for(0, 5, [&](Index) { count++; }); });
    EXPECT_EQ(count.load(), 20);
  }
  set_num_threads(1);
}
