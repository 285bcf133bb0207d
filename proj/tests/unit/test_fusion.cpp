#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "gradcheck.hpp"
#include "sdc/fusion/fusion.hpp"
#include "sdc/nn/ops.hpp"

using namespace sdc;
using namespace sdc::fusion;
using nn::Tensor;
using sdc::testing::random_leaf;

namespace {

FusionConfig site(int c, int h, int region = 4, int heads = 2) {
  FusionConfig cfg;
  cfg.channels = c;
  cfg.height = cfg.width = h;
  cfg.region = region;
  cfg.heads = heads;
  return cfg;
}

// Combine conv set to the exact mean over heads.
template <typename T>
void exact_mean_combine(FusionParams<T>& p) {
  Tensor<T>& w = p.combine.weight.mutable_value();
  w.fill(T(0));
  const int c = p.cfg.channels;
  for (int o = 0; o < c; ++o)
    for (int i = 0; i < p.cfg.heads; ++i) w[std::size_t(o) * p.cfg.heads * c + i * c + o] = T(1) / p.cfg.heads;
  p.combine.bias.mutable_value().fill(T(0));
}

Var<double> permute_channels(const Var<double>& f, const std::vector<int>& perm) {
  Tensor<double> out(f.shape());
  const int n = f.dim(0), c = f.dim(1), hw = f.dim(2) * f.dim(3);
  for (int in = 0; in < n; ++in)
    for (int j = 0; j < c; ++j)
      std::copy_n(f.value().data() + (std::size_t(in) * c + perm[j]) * hw, hw,
                  out.data() + (std::size_t(in) * c + j) * hw);
  return nn::constant(out);
}

}  // namespace

TEST(Embedding, DimensionIsThreeTimesRegions) {
  EXPECT_EQ(site(4, 8, 4).embed_dim(), 12);
  EXPECT_EQ(site(4, 16, 4).embed_dim(), 48);
  FusionConfig one = site(4, 4, 4, 1);
  EXPECT_EQ(one.embed_dim(), 3);
}

TEST(Embedding, ConstantMapGivesRepeatedValue) {
  Rng rng(1);
  FusionParams<double> p(site(2, 8, 4, 2), rng);
  Tensor<double> f({1, 2, 8, 8}, 2.5);
  for (int i = 64; i < 128; ++i) f[i] = -0.75;
  const Tensor<double> e = embed_channels(nn::constant(f), p.score_s, 4).value();
  ASSERT_EQ(e.shape(), (nn::Shape{1, 2, 12}));
  for (int j = 0; j < 12; ++j) {
    EXPECT_NEAR(e[j], 2.5, 1e-12);
    EXPECT_NEAR(e[12 + j], -0.75, 1e-12);
  }
}

TEST(Embedding, SingleRegionThreeValues) {
  Rng rng(2);
  FusionParams<double> p(site(1, 4, 4, 1), rng);
  p.score_s.weight.mutable_value().fill(0);
  Tensor<double> f({1, 1, 4, 4});
  std::iota(f.vec().begin(), f.vec().end(), 0.0);
  const Tensor<double> e = embed_channels(nn::constant(f), p.score_s, 4).value();
  ASSERT_EQ(e.size(), 3u);
  EXPECT_DOUBLE_EQ(e[0], 15);
  EXPECT_DOUBLE_EQ(e[1], 7.5);
  EXPECT_NEAR(e[2], 7.5, 1e-12);  // uniform score weights
}

TEST(CrossChannel, AttentionRowsSumToOne) {
  Rng rng(3);
  std::mt19937_64 r(3);
  FusionParams<double> p(site(8, 16, 4, 4), rng);
  AttentionTrace<double> trace;
  auto fs = random_leaf({2, 8, 16, 16}, r, -3, 3), fg = random_leaf({2, 8, 16, 16}, r, -3, 3);
  cross_channel_attention(fs, fg, p, &trace);
  ASSERT_EQ(trace.omega.size(), 4u);
  for (const auto& om : trace.omega) {
    ASSERT_EQ(om.shape(), (nn::Shape{2, 8, 8}));
    for (int row = 0; row < 16; ++row) {
      double s = 0;
      for (int j = 0; j < 8; ++j) {
        EXPECT_GE(om[row * 8 + j], 0.0);
        s += om[row * 8 + j];
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(CrossChannel, ZeroQueryWeightsGiveUniformAttention) {
  Rng rng(4);
  std::mt19937_64 r(4);
  FusionParams<double> p(site(4, 8, 4, 2), rng);
  for (auto& w : p.w_q) w.mutable_value().fill(0);
  AttentionTrace<double> trace;
  cross_channel_attention(random_leaf({1, 4, 8, 8}, r), random_leaf({1, 4, 8, 8}, r), p, &trace);
  for (const auto& om : trace.omega)
    for (double v : om.vec()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(CrossChannel, ZeroGrayFeaturesReturnRgbFeatures) {
  Rng rng(5);
  std::mt19937_64 r(5);
  FusionParams<double> p(site(4, 8, 4, 2), rng);
  exact_mean_combine(p);
  auto fs = random_leaf({2, 4, 8, 8}, r);
  const Tensor<double> out = cross_channel_attention(fs, nn::constant(Tensor<double>({2, 4, 8, 8})), p).value();
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], fs.value()[i], 1e-12);
}

TEST(CrossChannel, ChannelPermutationCommutes) {
  Rng rng(6);
  std::mt19937_64 r(6);
  FusionParams<double> p(site(5, 8, 4, 2), rng);
  // channel-symmetric score convs so region weights do not depend on the order
  p.score_s.weight.mutable_value().fill(0.3);
  p.score_g.weight.mutable_value().fill(-0.2);
  auto fs = random_leaf({1, 5, 8, 8}, r), fg = random_leaf({1, 5, 8, 8}, r);
  const std::vector<int> perm{3, 0, 4, 1, 2};
  AttentionTrace<double> a, b;
  cross_channel_attention(fs, fg, p, &a);
  cross_channel_attention(permute_channels(fs, perm), permute_channels(fg, perm), p, &b);
  for (std::size_t h = 0; h < a.omega.size(); ++h)
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        EXPECT_NEAR(b.omega[h][i * 5 + j], a.omega[h][perm[i] * 5 + perm[j]], 1e-12);
}

TEST(Spatial, EndpointsAreExact) {
  Rng rng(7);
  std::mt19937_64 r(7);
  FusionParams<double> p(site(4, 8, 4, 2), rng);
  auto ft = random_leaf({2, 4, 8, 8}, r), fg = random_leaf({2, 4, 8, 8}, r);
  FusionOptions one, zero;
  one.forced_spatial_weight = 1.0;
  zero.forced_spatial_weight = 0.0;
  EXPECT_EQ(spatial_attention(ft, fg, p, one).value(), ft.value());
  EXPECT_EQ(spatial_attention(ft, fg, p, zero).value(), fg.value());
  FusionOptions bad;
  bad.forced_spatial_weight = 1.5;
  EXPECT_THROW(spatial_attention(ft, fg, p, bad), ConfigError);
}

TEST(Spatial, EqualInputsPassThrough) {
  Rng rng(8);
  std::mt19937_64 r(8);
  FusionParams<double> p(site(4, 8, 4, 2), rng);
  auto f = random_leaf({1, 4, 8, 8}, r);
  const Tensor<double> out = spatial_attention(f, f, p).value();
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], f.value()[i], 1e-12);
}

TEST(Spatial, OutputIsConvexCombination) {
  Rng rng(9);
  std::mt19937_64 r(9);
  FusionParams<double> p(site(4, 8, 4, 2), rng);
  for (auto& v : p.spatial.weight.mutable_value().vec()) v *= 30;  // push gates off 0.5
  for (int trial = 0; trial < 10; ++trial) {
    auto ft = random_leaf({1, 4, 8, 8}, r, -5, 5), fg = random_leaf({1, 4, 8, 8}, r, -5, 5);
    Tensor<double> gate;
    const Tensor<double> out = spatial_attention(ft, fg, p, {}, &gate).value();
    for (double g : gate.vec()) {
      EXPECT_GE(g, 0.0);
      EXPECT_LE(g, 1.0);
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double lo = std::min(ft.value()[i], fg.value()[i]), hi = std::max(ft.value()[i], fg.value()[i]);
      EXPECT_GE(out[i], lo - 1e-12);
      EXPECT_LE(out[i], hi + 1e-12);
    }
  }
}

TEST(Fuse, AblationSwitches) {
  Rng rng(10);
  std::mt19937_64 r(10);
  FusionConfig cfg = site(4, 8, 4, 2);
  cfg.use_cca = false;
  cfg.use_sa = false;
  FusionParams<double> p(cfg, rng);
  auto fs = random_leaf({1, 4, 8, 8}, r), fg = random_leaf({1, 4, 8, 8}, r);
  EXPECT_EQ(fuse(fs, fg, p).value(), fs.value());
  FusionOptions zero;
  zero.forced_spatial_weight = 0.0;
  EXPECT_EQ(fuse(fs, fg, p, zero).value(), fg.value());
  FusionOptions nogray;
  nogray.zero_gray_features = true;
  nogray.forced_spatial_weight = 0.0;
  const Var<double> out = fuse(fs, fg, p, nogray);
  for (double v : out.value().vec()) EXPECT_EQ(v, 0.0);
}

TEST(Fuse, ShapesArePreserved) {
  std::mt19937_64 r(11);
  for (int c : {4, 8})
    for (int h : {8, 16}) {
      Rng rng(c * 100 + h);
      FusionParams<double> p(site(c, h, 4, 2), rng);
      auto fs = random_leaf({2, c, h, h}, r), fg = random_leaf({2, c, h, h}, r);
      EXPECT_EQ(fuse(fs, fg, p).shape(), (nn::Shape{2, c, h, h}));
    }
}

TEST(Fuse, MismatchedInputsAreShapeErrors) {
  Rng rng(12);
  std::mt19937_64 r(12);
  FusionParams<double> p(site(4, 8, 4, 2), rng);
  EXPECT_THROW(fuse(random_leaf({1, 4, 8, 8}, r), random_leaf({1, 4, 8, 4}, r), p), ShapeError);
  EXPECT_THROW(fuse(random_leaf({1, 3, 8, 8}, r), random_leaf({1, 3, 8, 8}, r), p), ShapeError);
}

TEST(Fuse, ConfigValidation) {
  Rng rng(13);
  EXPECT_THROW(FusionParams<double>(site(4, 8, 3, 2), rng), ShapeError);
  EXPECT_THROW(FusionParams<double>(site(4, 8, 4, 5), rng), ConfigError);
  EXPECT_NO_THROW(FusionParams<double>(site(4, 8, 4, 3), rng));
}

TEST(Fuse, GradientCheck) {
  Rng rng(14);
  std::mt19937_64 r(14);
  FusionParams<double> p(site(4, 8, 4, 2), rng);
  for (auto& v : p.spatial.weight.mutable_value().vec()) v *= 10;
  auto fs = random_leaf({1, 4, 8, 8}, r), fg = random_leaf({1, 4, 8, 8}, r);
  nn::ParamList<double> params;
  p.collect("fusion", params);
  std::vector<std::pair<std::string, Var<double>>> leaves{{"f_s", fs}, {"f_g", fg}};
  for (const auto& np : params) {
    np.var.node()->requires_grad = true;
    leaves.emplace_back(np.name, np.var);
  }
  Tensor<double> w({1, 4, 8, 8});
  std::uniform_real_distribution<double> u(-1, 1);
  for (double& v : w.vec()) v = u(r);
  const auto res = sdc::testing::gradcheck([&] { return nn::weighted_sum(fuse(fs, fg, p), w); }, leaves);
  EXPECT_LE(res.max_rel_error, 1e-4) << res.worst << " analytic " << res.worst_analytic << " numeric "
                                      << res.worst_numeric;
  EXPECT_GT(res.checked, 500u);
}
