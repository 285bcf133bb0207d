#include "sdc/kernels/densify.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace sdc::kernels {

void min_fill_pass(std::span<const float> in, std::span<float> out, int height, int width, int k) {
  constexpr float kInf = std::numeric_limits<float>::infinity();
  const int r = k / 2;
  std::vector<float> rowmin(in.size());

#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) {
    const float* src = in.data() + std::size_t(y) * width;
    float* dst = rowmin.data() + std::size_t(y) * width;
    for (int x = 0; x < width; ++x) {
      float m = kInf;
      const int x0 = std::max(0, x - r), x1 = std::min(width - 1, x + r);
      for (int xx = x0; xx <= x1; ++xx)
        if (src[xx] > 0.f) m = std::min(m, src[xx]);
      dst[x] = m;
    }
  }

#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) {
    const int y0 = std::max(0, y - r), y1 = std::min(height - 1, y + r);
    for (int x = 0; x < width; ++x) {
      const std::size_t i = std::size_t(y) * width + x;
      if (in[i] > 0.f) {
        out[i] = in[i];
        continue;
      }
      float m = kInf;
      for (int yy = y0; yy <= y1; ++yy) m = std::min(m, rowmin[std::size_t(yy) * width + x]);
      out[i] = m == kInf ? 0.f : m;
    }
  }
}

}  // namespace sdc::kernels
