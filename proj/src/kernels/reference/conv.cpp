#include <cstddef>

#include "sdc/kernels/conv.hpp"

namespace sdc::kernels::reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y) {
  const int ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  for (int n = 0; n < g.batch; ++n)
    for (int o = 0; o < g.out_channels; ++o)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          T acc = bias ? bias[o] : T(0);
          for (int c = 0; c < g.in_channels; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * g.stride - g.pad + ky, ix = ox * g.stride - g.pad + kx;
                if (iy < 0 || iy >= g.height || ix < 0 || ix >= g.width) continue;
                acc += w[((std::size_t(o) * g.in_channels + c) * k + ky) * k + kx] *
                       x[((std::size_t(n) * g.in_channels + c) * g.height + iy) * g.width + ix];
              }
          y[((std::size_t(n) * g.out_channels + o) * ho + oy) * wo + ox] = acc;
        }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  const int ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  for (int n = 0; n < g.batch; ++n)
    for (int o = 0; o < g.out_channels; ++o)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          const T gy = dy[((std::size_t(n) * g.out_channels + o) * ho + oy) * wo + ox];
          if (db) db[o] += gy;
          for (int c = 0; c < g.in_channels; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * g.stride - g.pad + ky, ix = ox * g.stride - g.pad + kx;
                if (iy < 0 || iy >= g.height || ix < 0 || ix >= g.width) continue;
                const std::size_t wi = ((std::size_t(o) * g.in_channels + c) * k + ky) * k + kx;
                const std::size_t xi = ((std::size_t(n) * g.in_channels + c) * g.height + iy) * g.width + ix;
                if (dw) dw[wi] += gy * x[xi];
                if (dx) dx[xi] += gy * w[wi];
              }
        }
}

template void conv2d_forward<float>(const ConvGeometry&, const float*, const float*, const float*, float*);
template void conv2d_forward<double>(const ConvGeometry&, const double*, const double*, const double*, double*);
template void conv2d_backward<float>(const ConvGeometry&, const float*, const float*, const float*, float*,
                                     float*, float*);
template void conv2d_backward<double>(const ConvGeometry&, const double*, const double*, const double*,
                                      double*, double*, double*);

}  // namespace sdc::kernels::reference
