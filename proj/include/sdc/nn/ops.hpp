#pragma once

#include <vector>

#include "sdc/nn/autograd.hpp"

// Differentiable ops. Image tensors are N x C x H x W; matrices are
// batched N x rows x cols. Every op is instantiated for float and double.
namespace sdc::nn {

/// Raised when a masked reduction has no pixel to average over.
class EmptyMaskError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Convolution; `bias` may be a null Var.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad);

// Pointwise.
template <typename T> Var<T> relu(const Var<T>& x);
template <typename T> Var<T> sigmoid(const Var<T>& x);
/// log(1 + exp(beta x)) / beta
template <typename T> Var<T> softplus(const Var<T>& x, T beta = T(1));
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& x, T s);
/// x * mask with mask N x 1 x H x W broadcast over channels (constant).
template <typename T> Var<T> mask_multiply(const Var<T>& x, const Tensor<T>& mask);

// Shape ops.
template <typename T> Var<T> reshape(const Var<T>& x, Shape shape);
template <typename T> Var<T> concat_channels(const std::vector<Var<T>>& xs);
template <typename T> Var<T> upsample_nearest2x(const Var<T>& x);

// Channel-axis pooling, N x C x H x W -> N x 1 x H x W.
template <typename T> Var<T> channel_max(const Var<T>& x);
template <typename T> Var<T> channel_mean(const Var<T>& x);

/// gate * a + (1 - gate) * b with gate N x 1 x H x W broadcast over C.
template <typename T> Var<T> spatial_gate(const Var<T>& gate, const Var<T>& a, const Var<T>& b);

/// Per-channel region descriptor. `f` is N x C x H x W, `score` is
/// N x 1 x H x W. For each of the M = (H/S)(W/S) regions in row-major
/// order emits [max, mean, sum_p softmax_region(score)_p * f_p], giving
/// N x C x 3M.
template <typename T> Var<T> region_embed(const Var<T>& f, const Var<T>& score, int region);

/// Batched matrix product. a: N x m x k; b: N x k x n or 1 x k x n (shared).
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
/// a * b^T with a: N x m x k, b: N x n x k.
template <typename T> Var<T> matmul_nt(const Var<T>& a, const Var<T>& b);
/// Softmax over the last axis.
template <typename T> Var<T> softmax_lastdim(const Var<T>& x);

/// Per-pixel depthwise 3x3 filtering: kernels is N x 9C x H x W with the
/// taps of channel c at [9c, 9c+9) in row-major (dy, dx) order.
template <typename T> Var<T> dynamic_depthwise3x3(const Var<T>& x, const Var<T>& kernels);

// Reductions to a scalar (shape {1}).
template <typename T> Var<T> sum(const Var<T>& x);
template <typename T> Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& weights);

/// Mean binary cross-entropy with probabilities clipped to [eps, 1-eps].
template <typename T> Var<T> bce_loss(const Var<T>& prob, const Tensor<T>& target, T eps = T(1e-7));
/// Mean |pred - gt| over pixels where mask != 0. Throws EmptyMaskError.
template <typename T> Var<T> masked_l1_loss(const Var<T>& pred, const Tensor<T>& gt, const Tensor<T>& mask);

}  // namespace sdc::nn
