#pragma once

namespace sdc::kernels {

/// Square-kernel 2-D convolution (cross-correlation) over N x C x H x W.
struct ConvGeometry {
  int batch = 1;
  int in_channels = 1;
  int height = 1;
  int width = 1;
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  int out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  int out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
};

/// y = conv(x, w) + b. `bias` may be null. Parallel over the batch.
template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y);

/// Accumulates (+=) into dx, dw, db; any of them may be null. The weight
/// gradient is reduced over the batch in a fixed order, so results do not
/// depend on the thread count.
template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db);

namespace reference {
template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y);
template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db);
}  // namespace reference

}  // namespace sdc::kernels
