#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "sdc/networks/networks.hpp"
#include "sdc/nn/optim.hpp"

using namespace sdc;
using namespace sdc::net;
using sdc::testing::random_leaf;

namespace {

Var<double> depth_leaf(nn::Shape s, std::mt19937_64& rng, bool grad = false, double lo = 80, double hi = 220) {
  Var<double> v = random_leaf(std::move(s), rng, lo, hi);
  v.node()->requires_grad = grad;
  return v;
}

FDCNetConfig toy_config(FusionKind kind = FusionKind::Attention) {
  FDCNetConfig c;
  c.widths = {3, 4};
  c.height = c.width = 8;
  c.region = 2;
  c.heads = 2;
  c.fusion = kind;
  return c;
}

}  // namespace

TEST(FSNet, LayerCountAndBudget) {
  Rng rng(1);
  FSNet<float> m(FSNetConfig{}, rng);
  EXPECT_EQ(m.convs.size(), 8u);
  nn::ParamList<float> p;
  m.collect(p);
  EXPECT_EQ(p.size(), 16u);  // weight + bias per conv
  EXPECT_EQ(nn::parameter_count(p), 5333u);
  EXPECT_LE(nn::parameter_count(p), kFsnetMaxParams);
  for (const auto& c : m.convs) EXPECT_EQ(c.kernel(), 3);
}

TEST(FSNet, NoSkipVariantIsSmaller) {
  Rng rng(1);
  FSNet<float> m(FSNetConfig{false, 250.0}, rng);
  nn::ParamList<float> p;
  m.collect(p);
  EXPECT_EQ(nn::parameter_count(p), 5333u - 8 * 8 * 9 - 6 * 6 * 9);
}

TEST(FSNet, OutputIsProbabilityAndDeterministic) {
  std::mt19937_64 r(2);
  auto gray = random_leaf({2, 1, 16, 12}, r, 0, 1), depth = depth_leaf({2, 1, 16, 12}, r);
  Rng a(5), b(5);
  FSNet<double> m1(FSNetConfig{}, a), m2(FSNetConfig{}, b);
  const auto p1 = fsnet_forward(gray, depth, m1).value();
  EXPECT_EQ(p1.shape(), (nn::Shape{2, 1, 16, 12}));
  for (double v : p1.vec()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_EQ(p1, fsnet_forward(gray, depth, m2).value());
}

TEST(FSNet, BadShapesAreShapeErrors) {
  Rng rng(3);
  std::mt19937_64 r(3);
  FSNet<double> m(FSNetConfig{}, rng);
  EXPECT_THROW(fsnet_forward(random_leaf({1, 1, 10, 8}, r), random_leaf({1, 1, 10, 8}, r), m), ShapeError);
  EXPECT_THROW(fsnet_forward(random_leaf({1, 1, 8, 8}, r), random_leaf({1, 1, 8, 4}, r), m), ShapeError);
}

TEST(Losses, BceAndMaskedL1Examples) {
  nn::Tensor<double> p({1, 1, 1, 2}, std::vector<double>{0.9, 0.2}), t({1, 1, 1, 2}, std::vector<double>{1, 0});
  EXPECT_NEAR(bce_loss(nn::constant(p), t).value()[0], -(std::log(0.9) + std::log(0.8)) / 2, 1e-12);
  nn::Tensor<double> d({1, 1, 1, 3}, std::vector<double>{100, 105, 0}), gt({1, 1, 1, 3}, std::vector<double>{101, 100, 50});
  nn::Tensor<double> m({1, 1, 1, 3}, std::vector<double>{1, 1, 0});
  EXPECT_DOUBLE_EQ(masked_l1_loss(nn::constant(d), gt, m).value()[0], 3.0);
}

TEST(Segment, ThresholdIsInclusive) {
  nn::Tensor<double> p({1, 1, 1, 4}, std::vector<double>{0.2, 0.5, 0.51, 0.99});
  EXPECT_EQ(segment(p, 0.5).vec(), (std::vector<double>{0, 1, 1, 1}));
  EXPECT_EQ(segment(p, 0.9).vec(), (std::vector<double>{0, 0, 0, 1}));
  EXPECT_THROW(segment(p, 0.0), ConfigError);
  EXPECT_THROW(segment(p, 1.0), ConfigError);
}

TEST(FDCNet, ShapeAndFiniteOutput) {
  FDCNetConfig c;
  c.widths = {4, 8, 8, 8};
  Rng rng(4);
  FDCNet<float> m(c, rng);
  std::mt19937_64 r(4);
  Var<float> gray(random_leaf({1, 1, 128, 128}, r, 0, 1).value().cast<float>());
  Var<float> depth(depth_leaf({1, 1, 128, 128}, r).value().cast<float>());
  const auto out = fdcnet_forward(gray, depth, m).value();
  EXPECT_EQ(out.shape(), (nn::Shape{1, 1, 128, 128}));
  for (float v : out.vec()) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.f);
  }
}

TEST(FDCNet, RegionGridIsTheSameAtEverySite) {
  FDCNetConfig c;
  for (int l = 0; l < c.levels(); ++l) EXPECT_EQ((c.height >> l) / c.region_at(l), 128 / (4 << 3));
  c.height = 100;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(FDCNet, GradientsReachBothInputs) {
  Rng rng(5);
  FDCNet<double> m(toy_config(), rng);
  std::mt19937_64 r(5);
  auto gray = random_leaf({1, 1, 8, 8}, r, 0, 1);
  auto depth = depth_leaf({1, 1, 8, 8}, r, true);
  nn::backward(nn::sum(fdcnet_forward(gray, depth, m)));
  ASSERT_TRUE(gray.has_grad());
  ASSERT_TRUE(depth.has_grad());
  double g = 0, d = 0;
  for (double v : gray.grad().vec()) g += std::abs(v);
  for (double v : depth.grad().vec()) d += std::abs(v);
  EXPECT_GT(g, 0);
  EXPECT_GT(d, 0);
}

TEST(FDCNet, GrayIsIgnoredWhenZeroedAndGateForcedToDepth) {
  Rng rng(6);
  FDCNet<double> m(toy_config(), rng);
  std::mt19937_64 r(6);
  auto g1 = random_leaf({1, 1, 8, 8}, r, 0, 1), g2 = random_leaf({1, 1, 8, 8}, r, 0, 1);
  auto depth = depth_leaf({1, 1, 8, 8}, r);
  fusion::FusionOptions probe;
  probe.forced_spatial_weight = 1.0;
  probe.zero_gray_features = true;
  EXPECT_EQ(fdcnet_forward(g1, depth, m, probe).value(), fdcnet_forward(g2, depth, m, probe).value());
  EXPECT_NE(fdcnet_forward(g1, depth, m).value(), fdcnet_forward(g2, depth, m).value());
}

TEST(FDCNet, GuidedVariant) {
  Rng rng(7);
  FDCNet<double> guided(toy_config(FusionKind::Guided), rng);
  nn::ParamList<double> p;
  guided.collect(p);
  // encoders 2x(1->3,3->3, 3->4,4->4), decoders 2x(7->3), guide sites (3->27 3x3, 3->3) + (4->36, 4->4), head
  const std::size_t enc = 2 * ((9 * 3 + 3) + (27 * 3 + 3) + (27 * 4 + 4) + (36 * 4 + 4));
  const std::size_t dec = 2 * (63 * 3 + 3);
  const std::size_t guide = (27 * 27 + 27) + (9 + 3) + (36 * 36 + 36) + (16 + 4);
  EXPECT_EQ(nn::parameter_count(p), enc + dec + guide + (27 + 1));
  EXPECT_TRUE(guided.attention.empty());
  Rng rng2(7);
  FDCNet<double> attention(toy_config(), rng2);
  std::mt19937_64 r(7);
  auto gray = random_leaf({1, 1, 8, 8}, r, 0, 1), depth = depth_leaf({1, 1, 8, 8}, r);
  EXPECT_THROW(guided_baseline_forward(gray, depth, attention), ConfigError);
  EXPECT_EQ(guided_baseline_forward(gray, depth, guided).shape(), (nn::Shape{1, 1, 8, 8}));
}

TEST(FDCNet, FewAdamStepsLowerTheLoss) {
  Rng rng(8);
  FDCNet<double> m(toy_config(FusionKind::Guided), rng);
  std::mt19937_64 r(8);
  auto gray = random_leaf({2, 1, 8, 8}, r, 0, 1), depth = depth_leaf({2, 1, 8, 8}, r);
  nn::Tensor<double> gt = depth.value(), mask(depth.shape(), 1.0);
  for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += 5.0 * gray.value()[i];
  nn::ParamList<double> params;
  m.collect(params);
  nn::set_requires_grad(params, true);
  nn::AdamW<double> opt(params, {.lr = 3e-3});
  auto loss = [&] { return masked_l1_loss(fdcnet_forward(gray, depth, m), gt, mask); };
  const double before = loss().value()[0];
  for (int i = 0; i < 60; ++i) {
    opt.zero_grad();
    nn::backward(loss());
    opt.step();
  }
  EXPECT_LT(loss().value()[0], 0.8 * before);
}

TEST(FDCNet, ToyGradientCheck) {
  for (FusionKind kind : {FusionKind::Attention, FusionKind::Guided}) {
    Rng rng(9);
    FDCNetConfig cfg = toy_config(kind);
    // O(1) output keeps finite-difference roundoff below the tolerance;
    // the normalized inputs match the 250 m scale.
    cfg.depth_scale = 1.0;
    FDCNet<double> m(cfg, rng);
    std::mt19937_64 r(9);
    auto gray = random_leaf({1, 1, 8, 8}, r, 0, 1), depth = depth_leaf({1, 1, 8, 8}, r, false, 0.3, 0.9);
    nn::ParamList<double> params;
    m.collect(params);
    std::vector<std::pair<std::string, Var<double>>> leaves;
    for (const auto& p : params) {
      p.var.node()->requires_grad = true;
      leaves.emplace_back(p.name, p.var);
    }
    nn::Tensor<double> w({1, 1, 8, 8});
    std::uniform_real_distribution<double> u(-1, 1);
    for (double& v : w.vec()) v = u(r);
    const auto res = sdc::testing::gradcheck(
        [&] { return nn::weighted_sum(fdcnet_forward(gray, depth, m), w); }, leaves, 1e-4, 200, 9);
    EXPECT_EQ(res.checked, 200u);
    EXPECT_LE(res.max_rel_error, 1e-4) << res.worst << " analytic " << res.worst_analytic << " numeric "
                                        << res.worst_numeric;
  }
}
