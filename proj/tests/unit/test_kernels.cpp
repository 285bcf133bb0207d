#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sdc/kernels/conv.hpp"
#include "sdc/kernels/knn.hpp"

using namespace sdc::kernels;

namespace {

template <typename T>
std::vector<T> randv(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<T> v(n);
  for (T& x : v) x = static_cast<T>(u(rng));
  return v;
}

template <typename T>
void compare_conv(const ConvGeometry& g, double tol) {
  std::mt19937_64 rng(g.kernel * 100 + g.stride * 10 + g.pad);
  const std::size_t nx = std::size_t(g.batch) * g.in_channels * g.height * g.width;
  const std::size_t nw = std::size_t(g.out_channels) * g.in_channels * g.kernel * g.kernel;
  const std::size_t ny = std::size_t(g.batch) * g.out_channels * g.out_height() * g.out_width();
  const auto x = randv<T>(nx, rng), w = randv<T>(nw, rng), b = randv<T>(g.out_channels, rng);
  const auto dy = randv<T>(ny, rng);

  std::vector<T> y0(ny), y1(ny);
  conv2d_forward(g, x.data(), w.data(), b.data(), y0.data());
  reference::conv2d_forward(g, x.data(), w.data(), b.data(), y1.data());
  for (std::size_t i = 0; i < ny; ++i) ASSERT_NEAR(y0[i], y1[i], tol) << "y[" << i << "]";

  std::vector<T> dx0(nx, T(0.5)), dx1(nx, T(0.5)), dw0(nw), dw1(nw), db0(g.out_channels), db1(g.out_channels);
  conv2d_backward(g, x.data(), w.data(), dy.data(), dx0.data(), dw0.data(), db0.data());
  reference::conv2d_backward(g, x.data(), w.data(), dy.data(), dx1.data(), dw1.data(), db1.data());
  for (std::size_t i = 0; i < nx; ++i) ASSERT_NEAR(dx0[i], dx1[i], tol) << "dx[" << i << "]";
  for (std::size_t i = 0; i < nw; ++i) ASSERT_NEAR(dw0[i], dw1[i], tol) << "dw[" << i << "]";
  for (int i = 0; i < g.out_channels; ++i) ASSERT_NEAR(db0[i], db1[i], tol) << "db[" << i << "]";
}

}  // namespace

class ConvVsReference : public ::testing::TestWithParam<ConvGeometry> {};

TEST_P(ConvVsReference, Double) { compare_conv<double>(GetParam(), 1e-12); }
TEST_P(ConvVsReference, Float) { compare_conv<float>(GetParam(), 2e-4); }

INSTANTIATE_TEST_SUITE_P(
    Geometries, ConvVsReference,
    ::testing::Values(ConvGeometry{2, 3, 9, 7, 4, 3, 1, 1}, ConvGeometry{3, 2, 10, 10, 5, 3, 2, 1},
                      ConvGeometry{1, 4, 8, 8, 2, 1, 1, 0}, ConvGeometry{2, 1, 11, 6, 3, 7, 1, 3},
                      ConvGeometry{1, 3, 9, 9, 2, 5, 2, 2}, ConvGeometry{2, 2, 6, 6, 2, 3, 1, 0}));

TEST(Conv, KnownValue) {
  // 3x3 ones kernel on a 3x3 ramp with zero padding: centre = sum of all.
  ConvGeometry g{1, 1, 3, 3, 1, 3, 1, 1};
  std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9}, w(9, 1.0), y(9);
  conv2d_forward<double>(g, x.data(), w.data(), nullptr, y.data());
  EXPECT_DOUBLE_EQ(y[4], 45);
  EXPECT_DOUBLE_EQ(y[0], 1 + 2 + 4 + 5);
  EXPECT_DOUBLE_EQ(y[8], 5 + 6 + 8 + 9);
}

TEST(Conv, NullGradientOutputsAreSkipped) {
  ConvGeometry g{1, 2, 5, 5, 3, 3, 1, 1};
  std::mt19937_64 rng(1);
  const auto x = randv<double>(50, rng), w = randv<double>(54, rng), dy = randv<double>(75, rng);
  std::vector<double> dx(50), dx_ref(50);
  conv2d_backward<double>(g, x.data(), w.data(), dy.data(), dx.data(), nullptr, nullptr);
  reference::conv2d_backward<double>(g, x.data(), w.data(), dy.data(), dx_ref.data(), nullptr, nullptr);
  for (int i = 0; i < 50; ++i) EXPECT_NEAR(dx[i], dx_ref[i], 1e-12);
}

TEST(Knn, ParallelMatchesReferenceExactly) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 5);
  for (int pts : {21, 64, 300}) {
    std::vector<double> xyz(3 * pts);
    for (double& v : xyz) v = n(rng);
    for (int k : {1, 5, 20}) {
      std::vector<double> a(pts), b(pts);
      knn_mean_distance(xyz, k, a);
      reference::knn_mean_distance(xyz, k, b);
      EXPECT_EQ(a, b) << pts << " points, k=" << k;
    }
  }
}

TEST(Knn, LineOracle) {
  // points at x = 0..4; k = 2 neighbours of the middle point are at distance 1.
  std::vector<double> xyz;
  for (int i = 0; i < 5; ++i) xyz.insert(xyz.end(), {double(i), 0.0, 0.0});
  std::vector<double> out(5);
  knn_mean_distance(xyz, 2, out);
  EXPECT_DOUBLE_EQ(out[2], 1.0);
  EXPECT_DOUBLE_EQ(out[0], 1.5);
  EXPECT_DOUBLE_EQ(out[1], 1.0);
}
