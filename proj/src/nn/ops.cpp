#include "sdc/nn/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <limits>

#include "sdc/kernels/conv.hpp"

namespace sdc::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Map = Eigen::Map<RowMat<T>>;
template <typename T>
using CMap = Eigen::Map<const RowMat<T>>;

template <typename T>
T* grad_of(const Var<T>& v) {
  return v.requires_grad() ? v.node()->grad_buffer().data() : nullptr;
}

void require_rank(const Shape& s, int rank, const char* op) {
  if (static_cast<int>(s.size()) != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(s));
}

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

template <typename T>
Var<T> unary(const Var<T>& x, auto fwd, auto dfdx_from_xy) {
  Tensor<T> y(x.shape());
  const T* xv = x.value().data();
  T* yv = y.data();
  const std::size_t n = y.size();
  for (std::size_t i = 0; i < n; ++i) yv[i] = fwd(xv[i]);
  return make_result<T>(std::move(y), {x}, [x, dfdx_from_xy](const Tensor<T>& g) mutable {
    T* dx = grad_of(x);
    const T* xv = x.value().data();
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * dfdx_from_xy(xv[i]);
  });
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad) {
  require_rank(x.shape(), 4, "conv2d");
  require_rank(weight.shape(), 4, "conv2d weight");
  if (weight.dim(1) != x.dim(1) || weight.dim(2) != weight.dim(3))
    throw ShapeError("conv2d: weight " + shape_str(weight.shape()) + " incompatible with input " +
                     shape_str(x.shape()));
  if (bias && (bias.value().size() != std::size_t(weight.dim(0))))
    throw ShapeError("conv2d: bias size mismatch");
  kernels::ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0), weight.dim(2), stride, pad};
  if (g.out_height() <= 0 || g.out_width() <= 0) throw ShapeError("conv2d: empty output");
  Tensor<T> y({g.batch, g.out_channels, g.out_height(), g.out_width()});
  kernels::conv2d_forward<T>(g, x.value().data(), weight.value().data(), bias ? bias.value().data() : nullptr,
                             y.data());
  std::vector<Var<T>> parents{x, weight};
  if (bias) parents.push_back(bias);
  return make_result<T>(std::move(y), parents, [x, weight, bias, g](const Tensor<T>& dy) {
    kernels::conv2d_backward<T>(g, x.value().data(), weight.value().data(), dy.data(), grad_of(x),
                                grad_of(weight), bias ? grad_of(bias) : nullptr);
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return unary(x, [](T v) { return v > T(0) ? v : T(0); }, [](T v) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  auto sig = [](T v) {
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
  };
  return unary(x, sig, [sig](T v) {
    const T s = sig(v);
    return s * (T(1) - s);
  });
}

template <typename T>
Var<T> softplus(const Var<T>& x, T beta) {
  auto fwd = [beta](T v) {
    const T z = beta * v;
    if (z > T(30)) return v;
    return std::log1p(std::exp(z)) / beta;
  };
  auto d = [beta](T v) {
    const T z = beta * v;
    if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
    const T e = std::exp(z);
    return e / (T(1) + e);
  };
  return unary(x, fwd, d);
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "add");
  Tensor<T> y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  return make_result<T>(std::move(y), {a, b}, [a, b](const Tensor<T>& g) {
    if (T* da = grad_of(a))
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
    if (T* db = grad_of(b))
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i];
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "sub");
  Tensor<T> y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  return make_result<T>(std::move(y), {a, b}, [a, b](const Tensor<T>& g) {
    if (T* da = grad_of(a))
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
    if (T* db = grad_of(b))
      for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, T s) {
  Tensor<T> y = x.value();
  for (T& v : y.vec()) v *= s;
  return make_result<T>(std::move(y), {x}, [x, s](const Tensor<T>& g) {
    T* dx = grad_of(x);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * s;
  });
}

template <typename T>
Var<T> mask_multiply(const Var<T>& x, const Tensor<T>& mask) {
  require_rank(x.shape(), 4, "mask_multiply");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = std::size_t(x.dim(2)) * x.dim(3);
  const bool broadcast = mask.shape() == Shape{n, 1, x.dim(2), x.dim(3)};
  if (!broadcast) require_same(mask.shape(), x.shape(), "mask_multiply");
  auto mask_at = [&mask, broadcast, c, plane](int in, int ic, std::size_t p) {
    return broadcast ? mask[std::size_t(in) * plane + p] : mask[(std::size_t(in) * c + ic) * plane + p];
  };
  Tensor<T> y = x.value();
  for (int in = 0; in < n; ++in)
    for (int ic = 0; ic < c; ++ic)
      for (std::size_t p = 0; p < plane; ++p) y[(std::size_t(in) * c + ic) * plane + p] *= mask_at(in, ic, p);
  return make_result<T>(std::move(y), {x}, [x, mask, broadcast, n, c, plane](const Tensor<T>& g) {
    T* dx = grad_of(x);
    for (int in = 0; in < n; ++in)
      for (int ic = 0; ic < c; ++ic)
        for (std::size_t p = 0; p < plane; ++p) {
          const std::size_t i = (std::size_t(in) * c + ic) * plane + p;
          const T m = broadcast ? mask[std::size_t(in) * plane + p] : mask[i];
          dx[i] += g[i] * m;
        }
  });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> y = x.value().reshaped(std::move(shape));
  return make_result<T>(std::move(y), {x}, [x](const Tensor<T>& g) {
    T* dx = grad_of(x);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
  });
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: no inputs");
  const int n = xs[0].dim(0), h = xs[0].dim(2), w = xs[0].dim(3);
  int c_total = 0;
  for (const Var<T>& x : xs) {
    require_rank(x.shape(), 4, "concat_channels");
    if (x.dim(0) != n || x.dim(2) != h || x.dim(3) != w)
      throw ShapeError("concat_channels: mismatched " + shape_str(x.shape()) + " vs " + shape_str(xs[0].shape()));
    c_total += x.dim(1);
  }
  const std::size_t plane = std::size_t(h) * w;
  Tensor<T> y({n, c_total, h, w});
  for (int in = 0; in < n; ++in) {
    int c0 = 0;
    for (const Var<T>& x : xs) {
      const int c = x.dim(1);
      std::copy_n(x.value().data() + std::size_t(in) * c * plane, c * plane,
                  y.data() + (std::size_t(in) * c_total + c0) * plane);
      c0 += c;
    }
  }
  return make_result<T>(std::move(y), xs, [xs, n, c_total, plane](const Tensor<T>& g) {
    int c0 = 0;
    for (const Var<T>& x : xs) {
      const int c = x.dim(1);
      if (T* dx = grad_of(x))
        for (int in = 0; in < n; ++in) {
          const T* src = g.data() + (std::size_t(in) * c_total + c0) * plane;
          T* dst = dx + std::size_t(in) * c * plane;
          for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
        }
      c0 += c;
    }
  });
}

template <typename T>
Var<T> upsample_nearest2x(const Var<T>& x) {
  require_rank(x.shape(), 4, "upsample_nearest2x");
  const int nc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> y({x.dim(0), x.dim(1), 2 * h, 2 * w});
  for (int p = 0; p < nc; ++p) {
    const T* src = x.value().data() + std::size_t(p) * h * w;
    T* dst = y.data() + std::size_t(p) * 4 * h * w;
    for (int r = 0; r < 2 * h; ++r)
      for (int c = 0; c < 2 * w; ++c) dst[std::size_t(r) * 2 * w + c] = src[std::size_t(r / 2) * w + c / 2];
  }
  return make_result<T>(std::move(y), {x}, [x, nc, h, w](const Tensor<T>& g) {
    T* dx = grad_of(x);
    for (int p = 0; p < nc; ++p) {
      const T* src = g.data() + std::size_t(p) * 4 * h * w;
      T* dst = dx + std::size_t(p) * h * w;
      for (int r = 0; r < 2 * h; ++r)
        for (int c = 0; c < 2 * w; ++c) dst[std::size_t(r / 2) * w + c / 2] += src[std::size_t(r) * 2 * w + c];
    }
  });
}

template <typename T>
Var<T> channel_max(const Var<T>& x) {
  require_rank(x.shape(), 4, "channel_max");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = std::size_t(x.dim(2)) * x.dim(3);
  Tensor<T> y({n, 1, x.dim(2), x.dim(3)});
  std::vector<int> arg(n * plane);
  for (int in = 0; in < n; ++in)
    for (std::size_t p = 0; p < plane; ++p) {
      int best = 0;
      T bv = x.value()[std::size_t(in) * c * plane + p];
      for (int ic = 1; ic < c; ++ic) {
        const T v = x.value()[(std::size_t(in) * c + ic) * plane + p];
        if (v > bv) {
          bv = v;
          best = ic;
        }
      }
      y[std::size_t(in) * plane + p] = bv;
      arg[std::size_t(in) * plane + p] = best;
    }
  return make_result<T>(std::move(y), {x}, [x, arg = std::move(arg), n, c, plane](const Tensor<T>& g) {
    T* dx = grad_of(x);
    for (int in = 0; in < n; ++in)
      for (std::size_t p = 0; p < plane; ++p)
        dx[(std::size_t(in) * c + arg[std::size_t(in) * plane + p]) * plane + p] += g[std::size_t(in) * plane + p];
  });
}

template <typename T>
Var<T> channel_mean(const Var<T>& x) {
  require_rank(x.shape(), 4, "channel_mean");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = std::size_t(x.dim(2)) * x.dim(3);
  Tensor<T> y({n, 1, x.dim(2), x.dim(3)});
  for (int in = 0; in < n; ++in)
    for (std::size_t p = 0; p < plane; ++p) {
      T s = 0;
      for (int ic = 0; ic < c; ++ic) s += x.value()[(std::size_t(in) * c + ic) * plane + p];
      y[std::size_t(in) * plane + p] = s / T(c);
    }
  return make_result<T>(std::move(y), {x}, [x, n, c, plane](const Tensor<T>& g) {
    T* dx = grad_of(x);
    for (int in = 0; in < n; ++in)
      for (int ic = 0; ic < c; ++ic)
        for (std::size_t p = 0; p < plane; ++p)
          dx[(std::size_t(in) * c + ic) * plane + p] += g[std::size_t(in) * plane + p] / T(c);
  });
}

template <typename T>
Var<T> spatial_gate(const Var<T>& gate, const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "spatial_gate");
  require_rank(a.shape(), 4, "spatial_gate");
  const int n = a.dim(0), c = a.dim(1);
  require_same(gate.shape(), Shape{n, 1, a.dim(2), a.dim(3)}, "spatial_gate weight");
  const std::size_t plane = std::size_t(a.dim(2)) * a.dim(3);
  Tensor<T> y(a.shape());
  for (int in = 0; in < n; ++in)
    for (int ic = 0; ic < c; ++ic)
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t i = (std::size_t(in) * c + ic) * plane + p;
        const T wv = gate.value()[std::size_t(in) * plane + p];
        y[i] = wv * a.value()[i] + (T(1) - wv) * b.value()[i];
      }
  return make_result<T>(std::move(y), {gate, a, b}, [gate, a, b, n, c, plane](const Tensor<T>& g) {
    T* dw = grad_of(gate);
    T* da = grad_of(a);
    T* db = grad_of(b);
    for (int in = 0; in < n; ++in)
      for (int ic = 0; ic < c; ++ic)
        for (std::size_t p = 0; p < plane; ++p) {
          const std::size_t i = (std::size_t(in) * c + ic) * plane + p;
          const T wv = gate.value()[std::size_t(in) * plane + p];
          if (dw) dw[std::size_t(in) * plane + p] += g[i] * (a.value()[i] - b.value()[i]);
          if (da) da[i] += g[i] * wv;
          if (db) db[i] += g[i] * (T(1) - wv);
        }
  });
}

template <typename T>
Var<T> region_embed(const Var<T>& f, const Var<T>& score, int region) {
  require_rank(f.shape(), 4, "region_embed");
  const int n = f.dim(0), c = f.dim(1), h = f.dim(2), w = f.dim(3);
  require_same(score.shape(), Shape{n, 1, h, w}, "region_embed score");
  if (region <= 0 || h % region != 0 || w % region != 0)
    throw ShapeError("region_embed: region size " + std::to_string(region) + " does not divide " +
                     std::to_string(h) + "x" + std::to_string(w));
  const int gh = h / region, gw = w / region, m = gh * gw;
  const int area = region * region;
  const std::size_t plane = std::size_t(h) * w;

  // Softmax of the score inside each region, shared by all channels.
  Tensor<T> weights({n, 1, h, w});
  for (int in = 0; in < n; ++in)
    for (int ry = 0; ry < gh; ++ry)
      for (int rx = 0; rx < gw; ++rx) {
        const T* s = score.value().data() + std::size_t(in) * plane;
        T* wt = weights.data() + std::size_t(in) * plane;
        T mx = -std::numeric_limits<T>::infinity();
        for (int y = ry * region; y < (ry + 1) * region; ++y)
          for (int x = rx * region; x < (rx + 1) * region; ++x) mx = std::max(mx, s[std::size_t(y) * w + x]);
        T z = 0;
        for (int y = ry * region; y < (ry + 1) * region; ++y)
          for (int x = rx * region; x < (rx + 1) * region; ++x) {
            const std::size_t p = std::size_t(y) * w + x;
            wt[p] = std::exp(s[p] - mx);
            z += wt[p];
          }
        for (int y = ry * region; y < (ry + 1) * region; ++y)
          for (int x = rx * region; x < (rx + 1) * region; ++x) wt[std::size_t(y) * w + x] /= z;
      }

  Tensor<T> out({n, c, 3 * m});
  std::vector<int> argmax(std::size_t(n) * c * m);
#pragma omp parallel for schedule(static) if (n * c > 16)
  for (int nc = 0; nc < n * c; ++nc) {
    const int in = nc / c;
    const T* fp = f.value().data() + std::size_t(nc) * plane;
    const T* wt = weights.data() + std::size_t(in) * plane;
    T* o = out.data() + std::size_t(nc) * 3 * m;
    for (int ry = 0; ry < gh; ++ry)
      for (int rx = 0; rx < gw; ++rx) {
        const int r = ry * gw + rx;
        T mx = -std::numeric_limits<T>::infinity(), sum = 0, wsum = 0;
        int amax = 0;
        for (int y = ry * region; y < (ry + 1) * region; ++y)
          for (int x = rx * region; x < (rx + 1) * region; ++x) {
            const int p = y * w + x;
            if (fp[p] > mx) {
              mx = fp[p];
              amax = p;
            }
            sum += fp[p];
            wsum += wt[p] * fp[p];
          }
        o[3 * r] = mx;
        o[3 * r + 1] = sum / T(area);
        o[3 * r + 2] = wsum;
        argmax[std::size_t(nc) * m + r] = amax;
      }
  }

  return make_result<T>(
      std::move(out), {f, score},
      [f, score, weights = std::move(weights), argmax = std::move(argmax), n, c, h, w, region, gw, m, area,
       plane](const Tensor<T>& g) {
        T* df = grad_of(f);
        T* ds = grad_of(score);
        const Tensor<T>& fv = f.value();
        for (int in = 0; in < n; ++in) {
          const T* wt = weights.data() + std::size_t(in) * plane;
          for (int ic = 0; ic < c; ++ic) {
            const std::size_t nc = std::size_t(in) * c + ic;
            const T* gp = g.data() + nc * 3 * m;
            const T* fp = fv.data() + nc * plane;
            for (int r = 0; r < m; ++r) {
              const int ry = r / gw, rx = r % gw;
              const T g_max = gp[3 * r], g_mean = gp[3 * r + 1] / T(area), g_w = gp[3 * r + 2];
              if (df) df[nc * plane + argmax[nc * m + r]] += g_max;
              // Weighted mean of this region, recomputed for the score gradient.
              T wm = 0;
              if (ds)
                for (int y = ry * region; y < (ry + 1) * region; ++y)
                  for (int x = rx * region; x < (rx + 1) * region; ++x) wm += wt[y * w + x] * fp[y * w + x];
              for (int y = ry * region; y < (ry + 1) * region; ++y)
                for (int x = rx * region; x < (rx + 1) * region; ++x) {
                  const int p = y * w + x;
                  if (df) df[nc * plane + p] += g_mean + g_w * wt[p];
                  if (ds) ds[std::size_t(in) * plane + p] += g_w * wt[p] * (fp[p] - wm);
                }
            }
          }
        }
        (void)h;
      });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  require_rank(a.shape(), 3, "matmul");
  require_rank(b.shape(), 3, "matmul");
  const int n = a.dim(0), m = a.dim(1), k = a.dim(2), nb = b.dim(0), p = b.dim(2);
  if (b.dim(1) != k || (nb != 1 && nb != n))
    throw ShapeError("matmul: incompatible " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  Tensor<T> y({n, m, p});
  for (int i = 0; i < n; ++i) {
    CMap<T> am(a.value().data() + std::size_t(i) * m * k, m, k);
    CMap<T> bm(b.value().data() + std::size_t(nb == 1 ? 0 : i) * k * p, k, p);
    Map<T> ym(y.data() + std::size_t(i) * m * p, m, p);
    ym.noalias() = am * bm;
  }
  return make_result<T>(std::move(y), {a, b}, [a, b, n, m, k, nb, p](const Tensor<T>& g) {
    T* da = grad_of(a);
    T* db = grad_of(b);
    for (int i = 0; i < n; ++i) {
      CMap<T> gm(g.data() + std::size_t(i) * m * p, m, p);
      const std::size_t bo = std::size_t(nb == 1 ? 0 : i) * k * p;
      if (da) {
        CMap<T> bm(b.value().data() + bo, k, p);
        Map<T>(da + std::size_t(i) * m * k, m, k).noalias() += gm * bm.transpose();
      }
      if (db) {
        CMap<T> am(a.value().data() + std::size_t(i) * m * k, m, k);
        Map<T>(db + bo, k, p).noalias() += am.transpose() * gm;
      }
    }
  });
}

template <typename T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  require_rank(a.shape(), 3, "matmul_nt");
  require_rank(b.shape(), 3, "matmul_nt");
  const int n = a.dim(0), m = a.dim(1), k = a.dim(2), p = b.dim(1);
  if (b.dim(0) != n || b.dim(2) != k)
    throw ShapeError("matmul_nt: incompatible " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  Tensor<T> y({n, m, p});
  for (int i = 0; i < n; ++i) {
    CMap<T> am(a.value().data() + std::size_t(i) * m * k, m, k);
    CMap<T> bm(b.value().data() + std::size_t(i) * p * k, p, k);
    Map<T>(y.data() + std::size_t(i) * m * p, m, p).noalias() = am * bm.transpose();
  }
  return make_result<T>(std::move(y), {a, b}, [a, b, n, m, k, p](const Tensor<T>& g) {
    T* da = grad_of(a);
    T* db = grad_of(b);
    for (int i = 0; i < n; ++i) {
      CMap<T> gm(g.data() + std::size_t(i) * m * p, m, p);
      if (da) {
        CMap<T> bm(b.value().data() + std::size_t(i) * p * k, p, k);
        Map<T>(da + std::size_t(i) * m * k, m, k).noalias() += gm * bm;
      }
      if (db) {
        CMap<T> am(a.value().data() + std::size_t(i) * m * k, m, k);
        Map<T>(db + std::size_t(i) * p * k, p, k).noalias() += gm.transpose() * am;
      }
    }
  });
}

template <typename T>
Var<T> softmax_lastdim(const Var<T>& x) {
  const int len = x.dim(-1);
  const std::size_t rows = x.value().size() / len;
  Tensor<T> y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xv = x.value().data() + r * len;
    T* yv = y.data() + r * len;
    const T mx = *std::max_element(xv, xv + len);
    T z = 0;
    for (int i = 0; i < len; ++i) z += (yv[i] = std::exp(xv[i] - mx));
    for (int i = 0; i < len; ++i) yv[i] /= z;
  }
  Tensor<T> saved = y;
  return make_result<T>(std::move(y), {x}, [x, saved = std::move(saved), len, rows](const Tensor<T>& g) {
    T* dx = grad_of(x);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* yv = saved.data() + r * len;
      const T* gv = g.data() + r * len;
      T dot = 0;
      for (int i = 0; i < len; ++i) dot += gv[i] * yv[i];
      for (int i = 0; i < len; ++i) dx[r * len + i] += yv[i] * (gv[i] - dot);
    }
  });
}

template <typename T>
Var<T> dynamic_depthwise3x3(const Var<T>& x, const Var<T>& kernels) {
  require_rank(x.shape(), 4, "dynamic_depthwise3x3");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  require_same(kernels.shape(), Shape{n, 9 * c, h, w}, "dynamic_depthwise3x3 kernels");
  const std::size_t plane = std::size_t(h) * w;
  Tensor<T> y(x.shape());
#pragma omp parallel for schedule(static) if (n * c > 16)
  for (int nc = 0; nc < n * c; ++nc) {
    const int in = nc / c, ic = nc % c;
    const T* xp = x.value().data() + std::size_t(nc) * plane;
    const T* kp = kernels.value().data() + (std::size_t(in) * 9 * c + 9 * ic) * plane;
    T* yp = y.data() + std::size_t(nc) * plane;
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        T acc = 0;
        for (int t = 0; t < 9; ++t) {
          const int sy = yy + t / 3 - 1, sx = xx + t % 3 - 1;
          if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
          acc += kp[t * plane + std::size_t(yy) * w + xx] * xp[std::size_t(sy) * w + sx];
        }
        yp[std::size_t(yy) * w + xx] = acc;
      }
  }
  return make_result<T>(std::move(y), {x, kernels}, [x, kernels, n, c, h, w, plane](const Tensor<T>& g) {
    T* dx = grad_of(x);
    T* dk = grad_of(kernels);
#pragma omp parallel for schedule(static) if (n * c > 16)
    for (int nc = 0; nc < n * c; ++nc) {
      const int in = nc / c, ic = nc % c;
      const T* xp = x.value().data() + std::size_t(nc) * plane;
      const std::size_t ko = (std::size_t(in) * 9 * c + 9 * ic) * plane;
      const T* kp = kernels.value().data() + ko;
      const T* gp = g.data() + std::size_t(nc) * plane;
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) {
          const T gv = gp[std::size_t(yy) * w + xx];
          for (int t = 0; t < 9; ++t) {
            const int sy = yy + t / 3 - 1, sx = xx + t % 3 - 1;
            if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
            const std::size_t kpix = t * plane + std::size_t(yy) * w + xx;
            if (dk) dk[ko + kpix] += gv * xp[std::size_t(sy) * w + sx];
            if (dx) dx[std::size_t(nc) * plane + std::size_t(sy) * w + sx] += gv * kp[kpix];
          }
        }
    }
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T s = 0;
  for (T v : x.value().vec()) s += v;
  return make_result<T>(Tensor<T>({1}, s), {x}, [x](const Tensor<T>& g) {
    T* dx = grad_of(x);
    for (std::size_t i = 0; i < x.value().size(); ++i) dx[i] += g[0];
  });
}

template <typename T>
Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& weights) {
  if (weights.size() != x.value().size()) throw ShapeError("weighted_sum: size mismatch");
  T s = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += x.value()[i] * weights[i];
  return make_result<T>(Tensor<T>({1}, s), {x}, [x, weights](const Tensor<T>& g) {
    T* dx = grad_of(x);
    for (std::size_t i = 0; i < weights.size(); ++i) dx[i] += g[0] * weights[i];
  });
}

template <typename T>
Var<T> bce_loss(const Var<T>& prob, const Tensor<T>& target, T eps) {
  require_same(prob.shape(), target.shape(), "bce_loss");
  const std::size_t n = target.size();
  if (n == 0) throw ShapeError("bce_loss: empty input");
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T p = std::clamp(prob.value()[i], eps, T(1) - eps);
    const T y = target[i];
    s += -y * std::log(p) - (T(1) - y) * std::log(T(1) - p);
  }
  return make_result<T>(Tensor<T>({1}, s / T(n)), {prob}, [prob, target, eps, n](const Tensor<T>& g) {
    T* dp = grad_of(prob);
    for (std::size_t i = 0; i < n; ++i) {
      const T raw = prob.value()[i];
      if (raw < eps || raw > T(1) - eps) continue;
      const T y = target[i];
      dp[i] += g[0] * (-y / raw + (T(1) - y) / (T(1) - raw)) / T(n);
    }
  });
}

template <typename T>
Var<T> masked_l1_loss(const Var<T>& pred, const Tensor<T>& gt, const Tensor<T>& mask) {
  require_same(pred.shape(), gt.shape(), "masked_l1_loss");
  require_same(pred.shape(), mask.shape(), "masked_l1_loss mask");
  std::size_t count = 0;
  T s = 0;
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (mask[i] != T(0)) {
      ++count;
      s += std::abs(pred.value()[i] - gt[i]);
    }
  if (count == 0) throw EmptyMaskError("masked_l1_loss: mask is empty");
  return make_result<T>(Tensor<T>({1}, s / T(count)), {pred}, [pred, gt, mask, count](const Tensor<T>& g) {
    T* dp = grad_of(pred);
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (mask[i] == T(0)) continue;
      const T d = pred.value()[i] - gt[i];
      const T sgn = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
      dp[i] += g[0] * sgn / T(count);
    }
  });
}

#define SDC_INSTANTIATE_OPS(T)                                                                  \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);               \
  template Var<T> relu(const Var<T>&);                                                         \
  template Var<T> sigmoid(const Var<T>&);                                                      \
  template Var<T> softplus(const Var<T>&, T);                                                  \
  template Var<T> add(const Var<T>&, const Var<T>&);                                           \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                           \
  template Var<T> scale(const Var<T>&, T);                                                     \
  template Var<T> mask_multiply(const Var<T>&, const Tensor<T>&);                              \
  template Var<T> reshape(const Var<T>&, Shape);                                               \
  template Var<T> concat_channels(const std::vector<Var<T>>&);                                 \
  template Var<T> upsample_nearest2x(const Var<T>&);                                           \
  template Var<T> channel_max(const Var<T>&);                                                  \
  template Var<T> channel_mean(const Var<T>&);                                                 \
  template Var<T> spatial_gate(const Var<T>&, const Var<T>&, const Var<T>&);                   \
  template Var<T> region_embed(const Var<T>&, const Var<T>&, int);                             \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                        \
  template Var<T> matmul_nt(const Var<T>&, const Var<T>&);                                     \
  template Var<T> softmax_lastdim(const Var<T>&);                                              \
  template Var<T> dynamic_depthwise3x3(const Var<T>&, const Var<T>&);                          \
  template Var<T> sum(const Var<T>&);                                                          \
  template Var<T> weighted_sum(const Var<T>&, const Tensor<T>&);                               \
  template Var<T> bce_loss(const Var<T>&, const Tensor<T>&, T);                                \
  template Var<T> masked_l1_loss(const Var<T>&, const Tensor<T>&, const Tensor<T>&);

SDC_INSTANTIATE_OPS(float)
SDC_INSTANTIATE_OPS(double)

}  // namespace sdc::nn
