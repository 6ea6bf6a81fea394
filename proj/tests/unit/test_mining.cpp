#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "osrlab/data/synth.hpp"
#include "osrlab/mining/kut.hpp"
#include "osrlab/mining/sweep.hpp"
#include "osrlab/mining/threshold_curve.hpp"
#include "osrlab/random.hpp"

using namespace osrlab;
using namespace osrlab::mining;

namespace {

nn::BackboneNet zero_net(std::size_t classes) {
  auto net = nn::BackboneNet::mlp(2, {4}, 3, classes, 1);
  nn::Network n = net.network();
  for (auto* p : n.parameters()) p->fill(0.0);
  return nn::BackboneNet(std::move(n));
}

ScoredAux fake_scores(const std::vector<double>& max_probs) {
  ScoredAux s{data::LabeledDataset(data::DataKind::vector, {1}, {"x"}), {}};
  for (std::size_t i = 0; i < max_probs.size(); ++i) {
    s.source.add(Tensor({1}, {double(i)}), 0, "aux");
    s.items.push_back({i, max_probs[i], 0, 0.1 * double(i)});
  }
  return s;
}

double residual(const ThresholdCurve& c, double da, double db, double dc, double dd) {
  double r = 0.0;
  for (const auto& p : c.points) {
    const double t = p.t;
    const double f = (c.a + da) + (c.b + db) * t + (c.c + dc) * t * t + (c.d + dd) * t * t * t;
    r += (f - p.auroc) * (f - p.auroc);
  }
  return r;
}

}  // namespace

TEST(Entropy, Examples) {
  EXPECT_EQ(entropy({0.0, 1.0, 0.0}), 0.0);
  EXPECT_NEAR(entropy(std::vector<double>(10, 0.1)), std::log2(10.0), 1e-12);
  EXPECT_EQ(entropy({0.5, 0.5}), 1.0);
  EXPECT_THROW(entropy({0.5, 0.6}), InvalidArgument);
  EXPECT_THROW(entropy({-0.5, 1.5}), InvalidArgument);
}

TEST(Entropy, MaximalAtUniformAndPermutationInvariant) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(2 + rng.below(8));
    double s = 0.0;
    for (double& v : p) s += (v = rng.uniform01());
    for (double& v : p) v /= s;
    const double h = entropy(p);
    EXPECT_LE(h, std::log2(double(p.size())) + 1e-12);
    std::vector<double> q(p.rbegin(), p.rend());
    rng.shuffle(q);
    EXPECT_NEAR(entropy(q), h, 1e-12);
  }
}

TEST(ScoreAux, ZeroNetIsUniform) {
  const auto net = zero_net(4);
  data::LabeledDataset dx(data::DataKind::vector, {2}, {"x0", "x1"});
  Rng rng(1);
  for (int i = 0; i < 10; ++i) dx.add(Tensor({2}, {rng.normal(), rng.normal()}), i % 2, "aux");
  const auto s = score_aux(net, dx);
  ASSERT_EQ(s.items.size(), 10u);
  for (const auto& it : s.items) {
    EXPECT_NEAR(it.max_prob, 0.25, 1e-15);
    EXPECT_NEAR(it.entropy_bits, 2.0, 1e-12);
  }
}

TEST(ScoreAux, MatchesPerItemForwardPasses) {
  const auto net = nn::BackboneNet::mlp(3, {8}, 5, 4, 9);
  data::LabeledDataset dx(data::DataKind::vector, {3}, {"x"});
  Rng rng(2);
  for (int i = 0; i < 100; ++i) dx.add(Tensor({3}, {rng.normal(), rng.normal(), rng.normal()}), 0, "aux");
  const auto s = score_aux(net, dx);
  for (std::size_t i = 0; i < dx.size(); ++i) {
    const Tensor p = net.forward(dx[i].sample.reshaped({1, 3})).probs;
    const double mx = *std::max_element(p.data().begin(), p.data().end());
    EXPECT_EQ(s.items[i].max_prob, mx);
  }
}

TEST(ScoreAux, RejectsOverlap) {
  const auto net = zero_net(2);
  data::LabeledDataset kk(data::DataKind::vector, {2}, {"cat", "dog"});
  kk.add(Tensor({2}), 0, "world");
  data::LabeledDataset dx(data::DataKind::vector, {2}, {"dog"});
  dx.add(Tensor({2}), 0, "aux");
  EXPECT_THROW(score_aux(net, dx, {&kk}), InvalidArgument);
  data::LabeledDataset dx2(data::DataKind::vector, {2}, {"bird"});
  dx2.add(Tensor({2}), 0, "world");
  EXPECT_THROW(score_aux(net, dx2, {&kk}), InvalidArgument);
  data::LabeledDataset dx3(data::DataKind::vector, {2}, {"bird"});
  dx3.add(Tensor({2}), 0, "aux");
  EXPECT_NO_THROW(score_aux(net, dx3, {&kk}));
}

TEST(MineKut, Examples) {
  const auto s = fake_scores({0.95, 0.81, 0.80, 0.5, 0.3});
  const auto r = mine_kut(s, 0.8);
  EXPECT_EQ(r.source_index, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(r.kut.class_names(), std::vector<std::string>{kKnownUnknownClass});
  EXPECT_NEAR(*r.mean_entropy, 0.05, 1e-15);
  EXPECT_EQ(mine_kut(s, 0.0).kut.size(), 5u);
  const auto empty = mine_kut(s, 1.0);
  EXPECT_TRUE(empty.kut.empty());
  EXPECT_FALSE(empty.warning.empty());
  EXPECT_FALSE(empty.mean_entropy.has_value());
  EXPECT_THROW(mine_kut(s, 1.5), InvalidArgument);
}

TEST(MineKut, AntiMonotoneInclusion) {
  Rng rng(7);
  std::vector<double> mp(300);
  for (double& v : mp) v = std::round(rng.uniform01() * 20.0) / 20.0;
  const auto s = fake_scores(mp);
  for (int trial = 0; trial < 100; ++trial) {
    double t1 = rng.uniform01(), t2 = rng.uniform01();
    if (t1 > t2) std::swap(t1, t2);
    const auto a = mine_kut(s, t1).source_index;
    const auto b = mine_kut(s, t2).source_index;
    EXPECT_TRUE(std::includes(a.begin(), a.end(), b.begin(), b.end()));
  }
}

TEST(ThresholdCurve, RecoversQuadratic) {
  std::vector<CurvePoint> pts;
  for (double t : {10.0, 20.0, 40.0, 50.0}) pts.push_back({t, 1 + 2 * t - 0.03 * t * t});
  const auto c = fit_threshold_curve(pts);
  EXPECT_NEAR(c.a, 1.0, 1e-9);
  EXPECT_NEAR(c.b, 2.0, 1e-9);
  EXPECT_NEAR(c.c, -0.03, 1e-9);
  EXPECT_NEAR(c.d, 0.0, 1e-9);
  EXPECT_TRUE(c.interior);
  EXPECT_NEAR(c.t_star, 100.0 / 3.0, 1e-6);
}

TEST(ThresholdCurve, ReferenceGridPeaksBetween80And90) {
  const auto c = fit_threshold_curve({{60, 75.60}, {70, 78.85}, {80, 89.25}, {90, 86.32}});
  EXPECT_TRUE(c.interior);
  EXPECT_GT(c.t_star, 80.0);
  EXPECT_LT(c.t_star, 90.0);
  EXPECT_LT(c.second_derivative(c.t_star), 0.0);
  EXPECT_NEAR(c.d, -3.41333333e-03, 1e-9);
}

TEST(ThresholdCurve, MonotoneCubicPicksEndpoint) {
  std::vector<CurvePoint> pts;
  for (double t : {60.0, 70.0, 80.0, 90.0}) pts.push_back({t, 0.001 * (t - 50) * (t - 50) * (t - 50) / 100.0 + t});
  const auto c = fit_threshold_curve(pts);
  EXPECT_EQ(c.t_star, 90.0);
  EXPECT_FALSE(c.interior);
}

TEST(ThresholdCurve, RandomCubicsRecoveredAndOrderInvariant) {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = rng.uniform(-5, 5), b = rng.uniform(-1, 1), c = rng.uniform(-0.05, 0.05),
                 d = rng.uniform(-5e-4, 5e-4);
    std::vector<CurvePoint> pts;
    const std::size_t n = 4 + rng.below(5);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = 50.0 + 5.0 * double(i) + rng.uniform(0, 2);
      pts.push_back({t, a + b * t + c * t * t + d * t * t * t});
    }
    const auto fit = fit_threshold_curve(pts);
    ASSERT_NEAR(fit.a, a, 1e-9);
    ASSERT_NEAR(fit.b, b, 1e-9);
    ASSERT_NEAR(fit.c, c, 1e-9);
    ASSERT_NEAR(fit.d, d, 1e-9);
    ASSERT_GE(fit.t_star, pts.front().t);
    ASSERT_LE(fit.t_star, pts.back().t);
    if (fit.interior) {
      ASSERT_LT(fit.second_derivative(fit.t_star), 0.0);
    }
    rng.shuffle(pts);
    ASSERT_EQ(fit_threshold_curve(pts).t_star, fit.t_star);
  }
}

TEST(ThresholdCurve, LeastSquaresResidualIsMinimal) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<CurvePoint> pts;
    for (int i = 0; i < 8; ++i) pts.push_back({0.1 * i, rng.uniform(0.5, 1.0)});
    const auto fit = fit_threshold_curve(pts);
    const double base = residual(fit, 0, 0, 0, 0);
    for (int k = 0; k < 4; ++k) {
      for (double e : {-1e-3, 1e-3}) {
        EXPECT_GE(residual(fit, k == 0 ? e : 0, k == 1 ? e : 0, k == 2 ? e : 0, k == 3 ? e : 0), base);
      }
    }
  }
}

TEST(ThresholdCurve, Rejections) {
  EXPECT_THROW(fit_threshold_curve({{1, 1}, {2, 2}, {3, 3}}), InvalidArgument);
  EXPECT_THROW(fit_threshold_curve({{1, 1}, {2, 2}, {3, 3}, {3, 4}}), InvalidArgument);
}

TEST(Sweep, OrderDedupAndAbsentRows) {
  const auto backbone = nn::BackboneNet::mlp(2, {6}, 4, 3, 2);
  data::GaussianSpec world;
  world.classes = {{"a", {0, 0}}, {"b", {3, 0}}};
  world.count_per_class = 40;
  world.seed = 1;
  const auto kk = data::synth_gaussians(world);
  world.classes = {{"u", {0, 4}}};
  world.origin = "uu";
  const auto uu = data::synth_gaussians(world);
  world.classes = {{"x", {-3, -3}}};
  world.origin = "aux";
  const auto scored = score_aux(backbone, data::synth_gaussians(world), {&kk, &uu});

  osrnet::CsTrainOptions cs;
  cs.hidden_widths = {3};
  cs.gdx.max_epochs = 20;
  const auto r = sweep_thresholds(backbone, scored, kk, kk, uu, {0.0, 0.5, 0.0, 1.0}, cs, 4);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[0].t, 0.0);
  EXPECT_EQ(r.rows[1].t, 0.5);
  EXPECT_EQ(r.rows[2].t, 1.0);
  EXPECT_EQ(r.rows[0].kut_size, 40u);
  EXPECT_TRUE(r.rows[0].auroc.has_value());
  EXPECT_FALSE(r.rows[2].auroc.has_value());
  EXPECT_EQ(r.rows[2].kut_size, 0u);
  EXPECT_GE(r.warnings.size(), 2u);

  // Rows do not depend on candidate order.
  const auto flipped = sweep_thresholds(backbone, scored, kk, kk, uu, {1.0, 0.5, 0.0}, cs, 4);
  EXPECT_EQ(flipped.rows[2].auroc, r.rows[0].auroc);
  EXPECT_EQ(flipped.rows[1].auroc, r.rows[1].auroc);
}
