#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "sdc/nn/ops.hpp"

using namespace sdc;
using namespace sdc::nn;
using sdc::testing::gradcheck;
using sdc::testing::random_leaf;

namespace {

constexpr double kTol = 1e-4;

Tensor<double> random_weights(const Shape& s, std::mt19937_64& rng) {
  Tensor<double> t(s);
  std::uniform_real_distribution<double> u(-1, 1);
  for (double& v : t.vec()) v = u(rng);
  return t;
}

// Scalar probe: sum of op output times fixed random weights.
void check(const std::string& what, const std::function<Var<double>()>& op,
           const std::vector<std::pair<std::string, Var<double>>>& leaves, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  const Tensor<double> w = random_weights(op().shape(), rng);
  const auto r = gradcheck([&] { return weighted_sum(op(), w); }, leaves);
  EXPECT_LE(r.max_rel_error, kTol) << what << " worst " << r.worst << " analytic " << r.worst_analytic
                                   << " numeric " << r.worst_numeric;
  EXPECT_GT(r.checked, 0u);
}

}  // namespace

TEST(OpsGrad, Conv2d) {
  std::mt19937_64 rng(1);
  for (int stride : {1, 2}) {
    auto x = random_leaf({2, 3, 6, 6}, rng), w = random_leaf({4, 3, 3, 3}, rng), b = random_leaf({4}, rng);
    check("conv", [&] { return conv2d(x, w, b, stride, 1); }, {{"x", x}, {"w", w}, {"b", b}});
  }
  auto x = random_leaf({1, 2, 5, 5}, rng), w = random_leaf({3, 2, 1, 1}, rng);
  check("conv1x1", [&] { return conv2d(x, w, Var<double>(), 1, 0); }, {{"x", x}, {"w", w}});
}

TEST(OpsGrad, Pointwise) {
  std::mt19937_64 rng(2);
  auto x = random_leaf({2, 2, 3, 3}, rng), y = random_leaf({2, 2, 3, 3}, rng);
  check("relu", [&] { return relu(x); }, {{"x", x}});
  check("sigmoid", [&] { return sigmoid(x); }, {{"x", x}});
  check("softplus", [&] { return softplus(x, 3.0); }, {{"x", x}});
  check("add", [&] { return add(x, y); }, {{"x", x}, {"y", y}});
  check("sub", [&] { return sub(x, y); }, {{"x", x}, {"y", y}});
  check("scale", [&] { return scale(x, -2.5); }, {{"x", x}});
  Tensor<double> mask({2, 1, 3, 3});
  for (std::size_t i = 0; i < mask.size(); i += 2) mask[i] = 1;
  check("mask_multiply", [&] { return mask_multiply(x, mask); }, {{"x", x}});
}

TEST(OpsGrad, ShapeOps) {
  std::mt19937_64 rng(3);
  auto a = random_leaf({2, 1, 4, 4}, rng), b = random_leaf({2, 3, 4, 4}, rng);
  check("concat", [&] { return concat_channels<double>({a, b}); }, {{"a", a}, {"b", b}});
  check("upsample", [&] { return upsample_nearest2x(b); }, {{"b", b}});
  check("reshape", [&] { return reshape(b, {2, 3, 16}); }, {{"b", b}});
  check("channel_max", [&] { return channel_max(b); }, {{"b", b}});
  check("channel_mean", [&] { return channel_mean(b); }, {{"b", b}});
}

TEST(OpsGrad, SpatialGate) {
  std::mt19937_64 rng(4);
  auto g = random_leaf({2, 1, 3, 3}, rng, 0, 1), a = random_leaf({2, 2, 3, 3}, rng),
       b = random_leaf({2, 2, 3, 3}, rng);
  check("spatial_gate", [&] { return spatial_gate(g, a, b); }, {{"g", g}, {"a", a}, {"b", b}});
}

TEST(OpsGrad, RegionEmbed) {
  std::mt19937_64 rng(5);
  auto f = random_leaf({2, 3, 8, 8}, rng), s = random_leaf({2, 1, 8, 8}, rng);
  check("region_embed", [&] { return region_embed(f, s, 4); }, {{"f", f}, {"s", s}});
}

TEST(OpsGrad, MatmulSoftmax) {
  std::mt19937_64 rng(6);
  auto a = random_leaf({2, 3, 4}, rng), b = random_leaf({2, 4, 5}, rng), shared = random_leaf({1, 4, 5}, rng),
       c = random_leaf({2, 6, 4}, rng);
  check("matmul", [&] { return matmul(a, b); }, {{"a", a}, {"b", b}});
  check("matmul_shared", [&] { return matmul(a, shared); }, {{"a", a}, {"w", shared}});
  check("matmul_nt", [&] { return matmul_nt(a, c); }, {{"a", a}, {"c", c}});
  check("softmax", [&] { return softmax_lastdim(b); }, {{"b", b}});
}

TEST(OpsGrad, DynamicDepthwise) {
  std::mt19937_64 rng(7);
  auto x = random_leaf({2, 2, 5, 5}, rng), k = random_leaf({2, 18, 5, 5}, rng);
  check("dyn_dw", [&] { return dynamic_depthwise3x3(x, k); }, {{"x", x}, {"k", k}});
}

TEST(OpsGrad, Losses) {
  std::mt19937_64 rng(8);
  auto p = random_leaf({2, 1, 4, 4}, rng, 0.05, 0.95);
  Tensor<double> target({2, 1, 4, 4}), mask({2, 1, 4, 4});
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = i % 3 == 0, mask[i] = i % 2;
  const auto r1 = gradcheck([&] { return bce_loss(p, target); }, {{"p", p}});
  EXPECT_LE(r1.max_rel_error, kTol);
  auto d = random_leaf({2, 1, 4, 4}, rng);
  const Tensor<double> gt = random_weights({2, 1, 4, 4}, rng);
  const auto r2 = gradcheck([&] { return masked_l1_loss(d, gt, mask); }, {{"d", d}});
  EXPECT_LE(r2.max_rel_error, kTol);
}

TEST(OpsValues, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(9);
  auto x = random_leaf({3, 4, 7}, rng, -20, 20);
  const Tensor<double> y = softmax_lastdim(x).value();
  for (int r = 0; r < 12; ++r) {
    double s = 0;
    for (int j = 0; j < 7; ++j) s += y[r * 7 + j];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(OpsValues, RegionEmbedConstantMap) {
  Tensor<double> f({1, 2, 4, 4}, 3.0);
  for (int i = 16; i < 32; ++i) f[i] = -1.5;
  const Var<double> e = region_embed(constant(f), constant(Tensor<double>({1, 1, 4, 4}, 0.7)), 2);
  ASSERT_EQ(e.shape(), (Shape{1, 2, 12}));
  for (int j = 0; j < 12; ++j) {
    EXPECT_NEAR(e.value()[j], 3.0, 1e-12);
    EXPECT_NEAR(e.value()[12 + j], -1.5, 1e-12);
  }
}

TEST(OpsValues, RegionEmbedOracle) {
  // one 2x2 region: values 1 2 3 4, uniform score -> max 4, mean 2.5, softmax-pool 2.5
  Tensor<double> f({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  Tensor<double> s({1, 1, 2, 2}, std::vector<double>{0, 0, 0, std::log(3.0)});
  const Tensor<double> e = region_embed(constant(f), constant(s), 2).value();
  EXPECT_DOUBLE_EQ(e[0], 4);
  EXPECT_DOUBLE_EQ(e[1], 2.5);
  // weights 1/6,1/6,1/6,1/2
  EXPECT_NEAR(e[2], (1 + 2 + 3) / 6.0 + 4 / 2.0, 1e-12);
}

TEST(OpsValues, RegionEmbedBadRegionIsShapeError) {
  Tensor<double> f({1, 1, 6, 6});
  EXPECT_THROW(region_embed(constant(f), constant(Tensor<double>({1, 1, 6, 6})), 4), ShapeError);
}

TEST(OpsValues, DynamicDepthwiseCentreTapIsIdentity) {
  std::mt19937_64 rng(10);
  auto x = random_leaf({1, 3, 4, 5}, rng);
  Tensor<double> k({1, 27, 4, 5});
  for (int c = 0; c < 3; ++c)
    for (int p = 0; p < 20; ++p) k[(9 * c + 4) * 20 + p] = 1.0;
  EXPECT_EQ(dynamic_depthwise3x3(x, constant(k)).value(), x.value());
}

TEST(OpsValues, BceAtHalfIsLn2) {
  Tensor<double> p({1, 1, 2, 2}, 0.5), t({1, 1, 2, 2}, std::vector<double>{0, 1, 1, 0});
  EXPECT_NEAR(bce_loss(constant(p), t).value()[0], std::log(2.0), 1e-12);
}

TEST(OpsValues, BceIsClippedNotInfinite) {
  Tensor<double> p({1, 1, 1, 2}, std::vector<double>{0, 1}), t({1, 1, 1, 2}, std::vector<double>{1, 0});
  const double l = bce_loss(constant(p), t).value()[0];
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_NEAR(l, -std::log(1e-7), 1e-6);
}

TEST(OpsValues, MaskedL1) {
  Tensor<double> pred({1, 1, 1, 4}, std::vector<double>{1, 2, 3, 4});
  Tensor<double> gt({1, 1, 1, 4}, std::vector<double>{2, 2, 0, 10});
  Tensor<double> all({1, 1, 1, 4}, 1.0), some({1, 1, 1, 4}, std::vector<double>{1, 0, 1, 0});
  EXPECT_DOUBLE_EQ(masked_l1_loss(constant(pred), gt, all).value()[0], (1 + 0 + 3 + 6) / 4.0);
  EXPECT_DOUBLE_EQ(masked_l1_loss(constant(pred), gt, some).value()[0], 2.0);
  EXPECT_THROW(masked_l1_loss(constant(pred), gt, Tensor<double>({1, 1, 1, 4})), EmptyMaskError);
}

TEST(Autograd, NoGradGuardSkipsGraph) {
  std::mt19937_64 rng(11);
  auto x = random_leaf({1, 1, 2, 2}, rng);
  {
    NoGradGuard g;
    EXPECT_FALSE(relu(x).requires_grad());
  }
  EXPECT_TRUE(relu(x).requires_grad());
}

TEST(Autograd, SharedSubgraphAccumulates) {
  Var<double> x(Tensor<double>({1}, 3.0), true);
  backward(add(scale(x, 2.0), scale(x, 5.0)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
}

TEST(OpsValues, FloatMatchesDouble) {
  std::mt19937_64 rng(12);
  auto xd = random_leaf({1, 2, 6, 6}, rng), wd = random_leaf({3, 2, 3, 3}, rng);
  Var<float> xf(xd.value().cast<float>()), wf(wd.value().cast<float>());
  const auto yd = relu(conv2d(xd, wd, Var<double>(), 1, 1)).value();
  const auto yf = relu(conv2d(xf, wf, Var<float>(), 1, 1)).value();
  for (std::size_t i = 0; i < yd.size(); ++i) EXPECT_NEAR(yf[i], yd[i], 1e-5);
}
