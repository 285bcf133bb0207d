#include "sdc/kernels/densify.hpp"

#include <cstddef>

namespace sdc::kernels {

namespace reference {

void min_fill_pass(std::span<const float> in, std::span<float> out, int height, int width, int k) {
  const int r = k / 2;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const std::size_t i = std::size_t(y) * width + x;
      if (in[i] > 0.f) {
        out[i] = in[i];
        continue;
      }
      float best = 0.f;
      bool found = false;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= height || xx < 0 || xx >= width) continue;
          const float v = in[std::size_t(yy) * width + xx];
          if (v > 0.f && (!found || v < best)) {
            best = v;
            found = true;
          }
        }
      out[i] = found ? best : 0.f;
    }
}

}  // namespace reference
}  // namespace sdc::kernels
