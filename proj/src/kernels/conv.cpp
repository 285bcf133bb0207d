#include "sdc/kernels/conv.hpp"

#include <Eigen/Core>
#include <cstddef>
#include <vector>

namespace sdc::kernels {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Map = Eigen::Map<RowMat<T>>;
template <typename T>
using CMap = Eigen::Map<const RowMat<T>>;

bool is_pointwise(const ConvGeometry& g) { return g.kernel == 1 && g.stride == 1 && g.pad == 0; }

// col has shape (C*k*k) x (Ho*Wo).
template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  const int ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  const std::size_t plane = std::size_t(ho) * wo;
  for (int c = 0; c < g.in_channels; ++c) {
    const T* xc = x + std::size_t(c) * g.height * g.width;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + (std::size_t(c) * k * k + ky * k + kx) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          T* out = row + std::size_t(oy) * wo;
          if (iy < 0 || iy >= g.height) {
            std::fill(out, out + wo, T(0));
            continue;
          }
          const T* xr = xc + std::size_t(iy) * g.width;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            out[ox] = (ix >= 0 && ix < g.width) ? xr[ix] : T(0);
          }
        }
      }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, T* dx) {
  const int ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  const std::size_t plane = std::size_t(ho) * wo;
  for (int c = 0; c < g.in_channels; ++c) {
    T* dxc = dx + std::size_t(c) * g.height * g.width;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + (std::size_t(c) * k * k + ky * k + kx) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) continue;
          T* dr = dxc + std::size_t(iy) * g.width;
          const T* in = row + std::size_t(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.width) dr[ix] += in[ox];
          }
        }
      }
  }
}

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y) {
  const int ho = g.out_height(), wo = g.out_width();
  const int kdim = g.in_channels * g.kernel * g.kernel;
  const int pix = ho * wo;
  const std::size_t xstride = std::size_t(g.in_channels) * g.height * g.width;
  const std::size_t ystride = std::size_t(g.out_channels) * pix;
  const bool pointwise = is_pointwise(g);
  CMap<T> wm(w, g.out_channels, kdim);

#pragma omp parallel
  {
    std::vector<T> col(pointwise ? 0 : std::size_t(kdim) * pix);
#pragma omp for schedule(static)
    for (int n = 0; n < g.batch; ++n) {
      const T* xn = x + n * xstride;
      if (!pointwise) im2col(g, xn, col.data());
      CMap<T> cm(pointwise ? xn : col.data(), kdim, pix);
      Map<T> ym(y + n * ystride, g.out_channels, pix);
      ym.noalias() = wm * cm;
      if (bias)
        for (int o = 0; o < g.out_channels; ++o) ym.row(o).array() += bias[o];
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  const int ho = g.out_height(), wo = g.out_width();
  const int kdim = g.in_channels * g.kernel * g.kernel;
  const int pix = ho * wo;
  const std::size_t xstride = std::size_t(g.in_channels) * g.height * g.width;
  const std::size_t ystride = std::size_t(g.out_channels) * pix;
  const std::size_t wsize = std::size_t(g.out_channels) * kdim;
  const bool pointwise = is_pointwise(g);
  CMap<T> wm(w, g.out_channels, kdim);
  std::vector<T> dw_per_sample(dw ? wsize * g.batch : 0, T(0));

#pragma omp parallel
  {
    std::vector<T> col(pointwise ? 0 : std::size_t(kdim) * pix);
    std::vector<T> dcol(dx && !pointwise ? std::size_t(kdim) * pix : 0);
#pragma omp for schedule(static)
    for (int n = 0; n < g.batch; ++n) {
      const T* xn = x + n * xstride;
      CMap<T> dym(dy + n * ystride, g.out_channels, pix);
      if (dw) {
        if (!pointwise) im2col(g, xn, col.data());
        CMap<T> cm(pointwise ? xn : col.data(), kdim, pix);
        Map<T> dwm(dw_per_sample.data() + n * wsize, g.out_channels, kdim);
        dwm.noalias() = dym * cm.transpose();
      }
      if (dx) {
        if (pointwise) {
          Map<T> dxm(dx + n * xstride, kdim, pix);
          dxm.noalias() += wm.transpose() * dym;
        } else {
          Map<T> dcm(dcol.data(), kdim, pix);
          dcm.noalias() = wm.transpose() * dym;
          col2im_add(g, dcol.data(), dx + n * xstride);
        }
      }
    }
  }

  if (dw)
    for (int n = 0; n < g.batch; ++n) {
      const T* src = dw_per_sample.data() + n * wsize;
      for (std::size_t i = 0; i < wsize; ++i) dw[i] += src[i];
    }
  if (db)
    for (int n = 0; n < g.batch; ++n)
      for (int o = 0; o < g.out_channels; ++o) {
        const T* row = dy + n * ystride + std::size_t(o) * pix;
        T s = 0;
        for (int p = 0; p < pix; ++p) s += row[p];
        db[o] += s;
      }
}

template void conv2d_forward<float>(const ConvGeometry&, const float*, const float*, const float*, float*);
template void conv2d_forward<double>(const ConvGeometry&, const double*, const double*, const double*, double*);
template void conv2d_backward<float>(const ConvGeometry&, const float*, const float*, const float*, float*,
                                     float*, float*);
template void conv2d_backward<double>(const ConvGeometry&, const double*, const double*, const double*,
                                      double*, double*, double*);

}  // namespace sdc::kernels
