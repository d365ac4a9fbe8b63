#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "playtrace/forest.hpp"

using namespace playtrace;

namespace {

std::vector<std::size_t> iota_n(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

/// Points uniform in [-1, 1]^2 labelled by the sign pattern of the coordinates.
void xor_data(std::size_t n, std::uint64_t seed, Matrix& x, std::vector<int>& y) {
  Rng rng(seed);
  x = Matrix(n, 2);
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(-1, 1);
    x(i, 1) = rng.uniform(-1, 1);
    y[i] = (x(i, 0) > 0) != (x(i, 1) > 0);
  }
}

double accuracy_of(const std::vector<int>& pred, const std::vector<int>& y) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < y.size(); ++i) c += pred[i] == y[i];
  return double(c) / double(y.size());
}

std::vector<int> tree_predict_all(const Tree& t, const Matrix& x) {
  std::vector<int> out;
  for (std::size_t i = 0; i < x.rows(); ++i) out.push_back(t.predict(x.row(i)));
  return out;
}

}  // namespace

TEST(Impurity, UnitValues) {
  const std::vector<std::size_t> balanced = {5, 5}, pure = {4, 0}, skew = {3, 1};
  EXPECT_EQ(entropy(balanced), 1.0);
  EXPECT_EQ(entropy(pure), 0.0);
  EXPECT_NEAR(entropy(skew), 0.8113, 1e-4);
  EXPECT_NEAR(entropy(skew), -(0.75 * std::log2(0.75) + 0.25 * std::log2(0.25)), 1e-15);
  EXPECT_EQ(gini(balanced), 0.5);
  EXPECT_EQ(gini(pure), 0.0);
  EXPECT_EQ(gini(skew), 0.375);
  const std::vector<std::size_t> empty = {0, 0};
  try {
    entropy(empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySet);
  }
  EXPECT_THROW(gini(empty), Error);
}

TEST(Impurity, MaximalOnBalanced) {
  for (std::size_t a = 0; a <= 20; ++a) {
    const std::vector<std::size_t> c = {a, 20 - a};
    EXPECT_LE(entropy(c), 1.0);
    EXPECT_LE(gini(c), 0.5);
  }
}

TEST(InformationGain, Examples) {
  const std::vector<std::size_t> parent = {2, 2};
  std::vector<ClassCounts> same = {{2, 2}, {0, 0}};
  EXPECT_EQ(information_gain(parent, same), 0.0);
  std::vector<ClassCounts> perfect = {{2, 0}, {0, 2}};
  EXPECT_EQ(information_gain(parent, perfect), 1.0);
  EXPECT_EQ(information_gain(parent, perfect, Criterion::Gini), 0.5);
  std::vector<ClassCounts> bad = {{2, 0}, {0, 1}};
  try {
    information_gain(parent, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PartitionMismatch);
  }
}

TEST(InformationGain, RandomSplitsMatchFormula) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    ClassCounts a = {std::size_t(rng.below(20)), std::size_t(rng.below(20)) + 1};
    ClassCounts b = {std::size_t(rng.below(20)) + 1, std::size_t(rng.below(20))};
    ClassCounts c = {std::size_t(rng.below(5)), std::size_t(rng.below(5))};
    ClassCounts parent = {a[0] + b[0] + c[0], a[1] + b[1] + c[1]};
    std::vector<ClassCounts> kids = {a, b, c};
    for (bool g : {true, false}) {
      const double n = double(parent[0] + parent[1]);
      long double want = oracle::impurity(parent, g);
      for (const auto& k : kids)
        if (k[0] + k[1] > 0) want -= (k[0] + k[1]) / n * oracle::impurity(k, g);
      EXPECT_NEAR(information_gain(parent, kids, g ? Criterion::Gini : Criterion::Entropy), double(want), 1e-12);
    }
  }
}

TEST(BestSplit, NoSplitWhenEveryFeatureConstant) {
  Matrix x(4, 2, 3.0);
  std::vector<int> y = {0, 1, 0, 1};
  EXPECT_FALSE(best_split(x, y, iota_n(4), iota_n(2), Criterion::Gini));
}

TEST(BestSplit, OneDimensionalMidpoint) {
  Matrix x(4, 1);
  x(0, 0) = 1;
  x(1, 0) = 2;
  x(2, 0) = 10;
  x(3, 0) = 11;
  std::vector<int> y = {0, 0, 1, 1};
  auto s = best_split(x, y, iota_n(4), iota_n(1), Criterion::Entropy);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->threshold, 6.0);
  EXPECT_EQ(s->gain, 1.0);
}

TEST(BestSplit, ZeroGainIsNoSplit) {
  // Exact four-point XOR: every axis split leaves both sides balanced.
  Matrix x(4, 2);
  x(1, 1) = x(2, 0) = x(3, 0) = x(3, 1) = 1;
  std::vector<int> y = {0, 1, 1, 0};
  EXPECT_FALSE(best_split(x, y, iota_n(4), iota_n(2), Criterion::Gini));
  EXPECT_FALSE(best_split(x, y, iota_n(4), iota_n(2), Criterion::Entropy));
}

TEST(BestSplit, TiesGoToLowerFeatureThenThreshold) {
  // Two identical columns: feature 0 wins.
  Matrix x(4, 2);
  for (std::size_t i = 0; i < 4; ++i) x(i, 0) = x(i, 1) = double(i);
  std::vector<int> y = {0, 0, 1, 1};
  auto s = best_split(x, y, iota_n(4), iota_n(2), Criterion::Gini);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->feature, 0u);
  // Symmetric pattern 0 1 1 0 on one feature: thresholds 0.5 and 2.5 tie; the lower wins.
  Matrix z(4, 1);
  for (std::size_t i = 0; i < 4; ++i) z(i, 0) = double(i);
  std::vector<int> yz = {0, 1, 1, 0};
  auto t = best_split(z, yz, iota_n(4), iota_n(1), Criterion::Gini);
  ASSERT_TRUE(t);
  EXPECT_EQ(t->threshold, 0.5);
}

TEST(BestSplit, MatchesExhaustiveScan) {
  Rng rng(11);
  for (int node = 0; node < 100; ++node) {
    const std::size_t n = 30, d = 4;
    Matrix x(n, d);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) x(i, j) = node % 2 ? rng.uniform(-5, 5) : double(rng.below(6));
      y[i] = rng.bernoulli(0.3 + 0.1 * (x(i, node % d) > 0)) ? 1 : 0;
    }
    // Repeated rows, as a bootstrap sample would have.
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i) rows.push_back(rng.below(n));
    for (bool g : {true, false}) {
      auto got = best_split(x, y, rows, iota_n(d), g ? Criterion::Gini : Criterion::Entropy);
      auto want = oracle::exhaustive_split(x, y, rows, iota_n(d), g);
      ASSERT_EQ(got.has_value(), want.has_value()) << "node " << node;
      if (!got) continue;
      EXPECT_EQ(got->feature, want->feature) << "node " << node;
      EXPECT_NEAR(got->threshold, want->threshold, 1e-12) << "node " << node;
      EXPECT_NEAR(got->gain, want->gain, 1e-12) << "node " << node;
    }
  }
}

TEST(TreeFit, PureInputIsOneLeaf) {
  Matrix x = oracle::random_matrix(10, 3, 1);
  std::vector<int> y(10, 1);
  auto t = tree_fit(x, y, {});
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_TRUE(t.nodes[0].leaf);
  EXPECT_EQ(t.nodes[0].label, 1);
  EXPECT_EQ(t.nodes[0].counts, (ClassCounts{0, 10}));
}

TEST(TreeFit, XorReachesPerfectTrainingAccuracy) {
  Matrix x;
  std::vector<int> y;
  xor_data(400, 5, x, y);
  for (auto crit : {Criterion::Gini, Criterion::Entropy}) {
    TreeConfig cfg;
    cfg.criterion = crit;
    auto t = tree_fit(x, y, cfg);
    EXPECT_EQ(accuracy_of(tree_predict_all(t, x), y), 1.0);
    EXPECT_GE(t.depth(), 2u);
  }
}

TEST(TreeFit, StumpAndDepthLimit) {
  Matrix x;
  std::vector<int> y;
  xor_data(300, 6, x, y);
  TreeConfig cfg;
  cfg.max_depth = 1;
  auto stump = tree_fit(x, y, cfg);
  std::size_t internal = 0;
  for (const auto& n : stump.nodes) internal += !n.leaf;
  EXPECT_LE(internal, 1u);
  for (std::size_t depth : {2u, 3u, 5u}) {
    cfg.max_depth = depth;
    EXPECT_LE(tree_fit(x, y, cfg).depth(), depth);
  }
  cfg.max_depth = 0;
  EXPECT_THROW(tree_fit(x, y, cfg), Error);
}

TEST(TreeFit, RegionsNestAlongEveryPath) {
  Matrix x;
  std::vector<int> y;
  oracle::blobs(300, 3, 0.5, 7, x, y);
  auto t = tree_fit(x, y, {});
  // Walk each path keeping [lo, hi] per feature; each threshold must fall inside.
  struct Frame {
    std::size_t node;
    std::vector<double> lo, hi;
  };
  std::vector<Frame> stack = {{0, std::vector<double>(3, -INFINITY), std::vector<double>(3, INFINITY)}};
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    const auto& n = t.nodes[f.node];
    if (n.leaf) {
      EXPECT_FALSE(n.counts.empty());
      continue;
    }
    EXPECT_GT(n.threshold, f.lo[n.feature]);
    EXPECT_LT(n.threshold, f.hi[n.feature]);
    Frame l = f, r = f;
    l.node = n.left;
    l.hi[n.feature] = n.threshold;
    r.node = n.right;
    r.lo[n.feature] = n.threshold;
    stack.push_back(l);
    stack.push_back(r);
  }
}

TEST(TreeFit, InvariantUnderRowPermutationWithDuplicates) {
  Matrix base;
  std::vector<int> yb;
  oracle::blobs(80, 2, 0.7, 8, base, yb);
  Matrix x = base;
  std::vector<int> y = yb;
  for (std::size_t i = 0; i < 40; ++i) {
    x.append_row(base.row(i));
    y.push_back(yb[i]);
  }
  auto t = tree_fit(x, y, {});
  std::vector<std::size_t> perm = iota_n(x.rows());
  Rng rng(9);
  rng.shuffle(std::span<std::size_t>(perm));
  Matrix xp = x.select_rows(perm);
  std::vector<int> yp;
  for (auto i : perm) yp.push_back(y[i]);
  EXPECT_EQ(tree_fit(xp, yp, {}), t);
}

TEST(Forest, SingleTreeNoBootstrapEqualsTreeFit) {
  Matrix x;
  std::vector<int> y;
  oracle::blobs(200, 4, 0.5, 10, x, y);
  ForestConfig cfg;
  cfg.tree_count = 1;
  cfg.bootstrap = false;
  cfg.tree.feature_subsample = FeatureSubsample::All;
  auto f = forest_fit(x, y, cfg);
  ASSERT_EQ(f.trees.size(), 1u);
  TreeConfig tc = cfg.tree;
  tc.seed = f.tree_seeds[0];
  EXPECT_EQ(f.trees[0], tree_fit(x, y, tc));
}

TEST(Forest, DeterministicAndSerialEqualsParallel) {
  Matrix x;
  std::vector<int> y;
  oracle::blobs(300, 5, 0.4, 11, x, y);
  ForestConfig cfg;
  cfg.tree_count = 20;
  auto a = forest_fit(x, y, cfg), b = forest_fit(x, y, cfg), s = forest_fit_serial(x, y, cfg);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, s);
  EXPECT_EQ(a.trees.size(), 20u);
  EXPECT_EQ(a.tree_seeds.size(), 20u);
  EXPECT_EQ(forest_predict(a, x), forest_predict_serial(a, x));
  double total = 0;
  for (double v : a.importances) {
    EXPECT_GE(v, 0.0);
    total += v;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  cfg.seed = 43;
  EXPECT_NE(forest_fit(x, y, cfg).trees, a.trees);
}

TEST(Forest, SeparableBlobsHundredTrees) {
  Matrix x, xt;
  std::vector<int> y, yt;
  oracle::blobs(600, 4, 1.5, 12, x, y);
  oracle::blobs(400, 4, 1.5, 13, xt, yt);
  auto f = forest_fit(x, y, {});
  EXPECT_EQ(f.trees.size(), 100u);
  const double forest_acc = accuracy_of(forest_predict(f, xt), yt);
  EXPECT_GE(forest_acc, 0.95);
}

TEST(Forest, VotesMatchPerTreeTraversal) {
  Matrix x;
  std::vector<int> y;
  oracle::blobs(200, 3, 0.3, 14, x, y);
  ForestConfig cfg;
  cfg.tree_count = 15;
  auto f = forest_fit(x, y, cfg);
  Matrix q = oracle::random_matrix(100, 3, 15, -2, 2);
  auto pred = forest_predict(f, q);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    int ones = 0;
    for (const auto& t : f.trees) {
      // Traverse by hand.
      std::size_t n = 0;
      while (!t.nodes[n].leaf) n = q(i, t.nodes[n].feature) <= t.nodes[n].threshold ? t.nodes[n].left : t.nodes[n].right;
      ones += t.nodes[n].label;
    }
    EXPECT_EQ(pred[i], ones * 2 > int(f.trees.size()) ? 1 : 0);
  }
}

TEST(Forest, VoteExamples) {
  // Hand-built one-leaf trees voting 1,1,0 and a 1,0 tie.
  auto leaf = [](int label) {
    Tree t;
    TreeNode n;
    n.label = label;
    n.counts = {1, 1};
    t.nodes.push_back(n);
    return t;
  };
  ForestModel m;
  m.input_dim = 1;
  m.trees = {leaf(1), leaf(1), leaf(0)};
  Matrix q(1, 1);
  EXPECT_EQ(forest_predict(m, q), (std::vector<int>{1}));
  m.trees = {leaf(1), leaf(0)};
  EXPECT_EQ(forest_predict(m, q), (std::vector<int>{0}));
  try {
    forest_predict(m, Matrix(1, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Forest, SerializationRoundTrip) {
  Matrix x;
  std::vector<int> y;
  oracle::blobs(100, 3, 0.5, 16, x, y);
  ForestConfig cfg;
  cfg.tree_count = 5;
  cfg.tree.max_depth = 4;
  auto f = forest_fit(x, y, cfg);
  ByteWriter out;
  write_forest(out, f);
  ByteReader in(out.bytes());
  EXPECT_EQ(read_forest(in), f);
  EXPECT_TRUE(in.done());
}
