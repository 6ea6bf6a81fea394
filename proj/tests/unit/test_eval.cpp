#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "osrlab/eval/distances.hpp"
#include "osrlab/eval/metrics.hpp"
#include "osrlab/eval/mmd.hpp"

using namespace osrlab;
using namespace osrlab::eval;

TEST(Roc, Examples) {
  EXPECT_EQ(roc_auroc({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}).auroc, 1.0);
  EXPECT_EQ(roc_auroc({0.5, 0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0, 0}).auroc, 0.5);
  EXPECT_EQ(roc_auroc({0.8, 0.6, 0.7, 0.2}, {1, 1, 0, 0}).auroc, 0.75);
}

TEST(Roc, TiesCollapseToOnePoint) {
  const auto roc = roc_auroc({0.5, 0.5, 0.5}, {1, 0, 1});
  ASSERT_EQ(roc.points.size(), 2u);
  EXPECT_EQ(roc.points[1].fpr, 1.0);
  EXPECT_EQ(roc.points[1].tpr, 1.0);
}

TEST(Roc, Rejections) {
  EXPECT_THROW(roc_auroc({0.1, 0.2}, {1, 1}), InvalidArgument);
  EXPECT_THROW(roc_auroc({0.1, 0.2}, {1, 2}), InvalidArgument);
  EXPECT_THROW(roc_auroc({0.1}, {1, 0}), InvalidArgument);
}

TEST(Roc, MatchesPairwiseOracleAndIsAStaircase) {
  Rng rng(11);
  std::vector<double> s;
  std::vector<int> l;
  for (int trial = 0; trial < 1000; ++trial) {
    oracle::random_instance(rng, 200, s, l);
    const auto roc = roc_auroc(s, l);
    ASSERT_NEAR(roc.auroc, oracle::pairwise_auroc(s, l), 1e-12);
    ASSERT_EQ(roc.points.front().fpr, 0.0);
    ASSERT_EQ(roc.points.front().tpr, 0.0);
    ASSERT_EQ(roc.points.back().fpr, 1.0);
    ASSERT_EQ(roc.points.back().tpr, 1.0);
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
      ASSERT_GE(roc.points[i].fpr, roc.points[i - 1].fpr);
      ASSERT_GE(roc.points[i].tpr, roc.points[i - 1].tpr);
      ASSERT_LT(roc.points[i].threshold, roc.points[i - 1].threshold);
    }
    std::vector<double> neg(s);
    for (double& v : neg) v = -v;
    ASSERT_EQ(roc.auroc + roc_auroc(neg, l).auroc, 1.0);
  }
}

TEST(Accuracy, Examples) {
  const std::vector<std::size_t> a{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<std::size_t> b = a;
  EXPECT_EQ(accuracy(a, b), 1.0);
  b = {1, 2, 3, 4, 5, 6, 7, 8, 9, 0};
  EXPECT_EQ(accuracy(a, b), 0.0);
  b = {0, 1, 2, 3, 4, 5, 6, 0, 0, 0};
  EXPECT_DOUBLE_EQ(accuracy(a, b), 0.7);
  EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), InvalidArgument);
}

TEST(Mmd, LinearKernelIsMeanDifference) {
  Rng rng(3);
  const Tensor x = oracle::random_matrix(rng, 20, 4);
  const Tensor y = oracle::random_matrix(rng, 30, 4, 0.5);
  double d2 = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < 20; ++i) mx += x.at(i, k) / 20.0;
    for (std::size_t i = 0; i < 30; ++i) my += y.at(i, k) / 30.0;
    d2 += (mx - my) * (mx - my);
  }
  EXPECT_NEAR(mmd(x, y, Kernel::linear()).distance, std::sqrt(d2), 1e-12);
  EXPECT_NEAR(mmd(x, x, Kernel::linear()).distance, 0.0, 1e-12);
}

TEST(Mmd, ThreePointHandCase) {
  const Tensor x({3, 2}, {0, 0, 1, 0, 0, 1});
  const Tensor y({3, 2}, {2, 2, 1, 1, 3, 0});
  EXPECT_NEAR(mmd(x, y, Kernel::rbf(1.0)).distance, oracle::brute_mmd(x, y, 1.0), 1e-12);
}

TEST(Mmd, MatchesBruteForceOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng.below(8);
    const Tensor x = oracle::random_matrix(rng, 1 + rng.below(50), d);
    const Tensor y = oracle::random_matrix(rng, 1 + rng.below(50), d, rng.uniform(0, 2));
    const auto r = mmd(x, y);
    ASSERT_NEAR(r.distance, oracle::brute_mmd(x, y, r.bandwidth), 1e-12);
    ASSERT_NEAR(mmd(x, y, Kernel::linear()).distance, oracle::brute_mmd(x, y, 0.0), 1e-12);
    ASSERT_LE(mmd(x, x).distance, 1e-9);
  }
}

TEST(Mmd, SymmetryAndLinearTriangle) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = oracle::random_matrix(rng, 10, 3);
    const Tensor y = oracle::random_matrix(rng, 12, 3, 1.0);
    const Tensor z = oracle::random_matrix(rng, 8, 3, -0.5);
    EXPECT_NEAR(mmd(x, y).distance, mmd(y, x).distance, 1e-12);
    const auto lin = Kernel::linear();
    EXPECT_LE(mmd(x, z, lin).distance, mmd(x, y, lin).distance + mmd(y, z, lin).distance + 1e-9);
  }
}

TEST(Mmd, IdenticalPointsFallBackToUnitBandwidth) {
  const Tensor x({3, 2}, {1, 1, 1, 1, 1, 1});
  const auto r = mmd(x, x);
  EXPECT_EQ(r.bandwidth, 1.0);
  EXPECT_FALSE(r.warning.empty());
  EXPECT_EQ(r.distance, 0.0);
}

TEST(Mmd, Rejections) {
  EXPECT_THROW(mmd(Tensor({0, 2}), Tensor({1, 2})), InvalidArgument);
  EXPECT_THROW(mmd(Tensor({1, 2}), Tensor({1, 3})), ShapeError);
}

TEST(Distances, SortedTable) {
  const auto net = nn::BackboneNet::mlp(2, {8}, 4, 3, 1);
  data::LabeledDataset kk(data::DataKind::vector, {2}, {"a"});
  data::LabeledDataset far(data::DataKind::vector, {2}, {"b"});
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    kk.add(Tensor({2}, {rng.normal(), rng.normal()}), 0, "kk");
    far.add(Tensor({2}, {rng.normal() + 5, rng.normal() - 5}), 0, "far");
  }
  EXPECT_TRUE(compare_distribution_distances(net, kk, {}).empty());
  const auto table = compare_distribution_distances(net, kk, {{"far", &far}, {"self", &kk}});
  ASSERT_EQ(table.size(), 2u);
  EXPECT_EQ(table[0].name, "self");
  EXPECT_LE(table[0].mmd.distance, 1e-9);
  EXPECT_GT(table[1].mmd.distance, 0.0);
}
