#include "sdc/networks/networks.hpp"

namespace sdc::net {

template <typename T>
FSNet<T>::FSNet(const FSNetConfig& c, Rng& rng) : cfg(c) {
  if (!(cfg.depth_scale > 0)) throw ConfigError("fsnet: depth_scale must be positive");
  const int s2 = cfg.skips ? 8 : 0, s1 = cfg.skips ? 6 : 0;
  convs = {nn::Conv2d<T>(2, 6, 3, 1, rng),       nn::Conv2d<T>(6, 8, 3, 2, rng),
           nn::Conv2d<T>(8, 12, 3, 2, rng),      nn::Conv2d<T>(12, 12, 3, 1, rng),
           nn::Conv2d<T>(12 + s2, 8, 3, 1, rng), nn::Conv2d<T>(8 + s1, 6, 3, 1, rng),
           nn::Conv2d<T>(6, 6, 3, 1, rng),       nn::Conv2d<T>(6, 1, 3, 1, rng)};
  nn::ParamList<T> params;
  collect(params);
  if (nn::parameter_count(params) > kFsnetMaxParams)
    throw ConfigError("fsnet: parameter budget exceeded (" + std::to_string(nn::parameter_count(params)) + ")");
}

template <typename T>
void FSNet<T>::collect(nn::ParamList<T>& out, const std::string& prefix) const {
  for (int i = 0; i < kFsnetConvLayers; ++i) convs[i].collect(prefix + ".conv" + std::to_string(i + 1), out);
}

template <typename T>
Var<T> fsnet_forward(const Var<T>& gray, const Var<T>& sparse_depth, const FSNet<T>& m) {
  if (gray.shape() != sparse_depth.shape() || gray.value().rank() != 4 || gray.dim(1) != 1)
    throw ShapeError("fsnet: gray " + nn::shape_str(gray.shape()) + " and depth " +
                     nn::shape_str(sparse_depth.shape()) + " must both be N x 1 x H x W");
  if (gray.dim(2) % 4 != 0 || gray.dim(3) % 4 != 0) throw ShapeError("fsnet: sides must be multiples of 4");
  const auto& c = m.convs;
  const Var<T> x = nn::concat_channels<T>({gray, nn::scale(sparse_depth, T(1.0 / m.cfg.depth_scale))});
  const Var<T> h1 = nn::relu(c[0](x));
  const Var<T> h2 = nn::relu(c[1](h1));
  const Var<T> h3 = nn::relu(c[2](h2));
  const Var<T> h4 = nn::relu(c[3](h3));
  Var<T> u = nn::upsample_nearest2x(h4);
  const Var<T> h5 = nn::relu(c[4](m.cfg.skips ? nn::concat_channels<T>({u, h2}) : u));
  u = nn::upsample_nearest2x(h5);
  const Var<T> h6 = nn::relu(c[5](m.cfg.skips ? nn::concat_channels<T>({u, h1}) : u));
  const Var<T> h7 = nn::relu(c[6](h6));
  return nn::sigmoid(c[7](h7));
}

void FDCNetConfig::validate() const {
  if (widths.empty()) throw ConfigError("fdcnet: at least one scale required");
  for (int w : widths)
    if (w <= 0) throw ConfigError("fdcnet: channel widths must be positive");
  if (!(depth_scale > 0) || !(softplus_beta > 0)) throw ConfigError("fdcnet: depth_scale and beta must be positive");
  const int down = 1 << (levels() - 1);
  if (height % down != 0 || width % down != 0)
    throw ConfigError("fdcnet: input " + std::to_string(height) + "x" + std::to_string(width) +
                      " not divisible by " + std::to_string(down));
  if (fusion == FusionKind::Attention)
    for (int l = 0; l < levels(); ++l)
      fusion::FusionConfig{widths[l], height >> l, width >> l, region_at(l), heads, use_cca, use_sa}.validate();
}

template <typename T>
FDCNet<T>::FDCNet(const FDCNetConfig& c, Rng& rng) : cfg(c) {
  cfg.validate();
  const int L = cfg.levels();
  for (int l = 0; l < L; ++l) {
    const int in = l == 0 ? 1 : cfg.widths[l - 1], w = cfg.widths[l], stride = l == 0 ? 1 : 2;
    gray_enc.push_back({nn::Conv2d<T>(in, w, 3, stride, rng), nn::Conv2d<T>(w, w, 3, 1, rng)});
    depth_enc.push_back({nn::Conv2d<T>(in, w, 3, stride, rng), nn::Conv2d<T>(w, w, 3, 1, rng)});
    if (l + 1 < L) {
      gray_dec.emplace_back(cfg.widths[l + 1] + w, w, 3, 1, rng);
      depth_dec.emplace_back(cfg.widths[l + 1] + w, w, 3, 1, rng);
    }
    if (cfg.fusion == FusionKind::Attention) {
      attention.emplace_back(
          fusion::FusionConfig{w, cfg.height >> l, cfg.width >> l, cfg.region_at(l), cfg.heads, cfg.use_cca,
                               cfg.use_sa},
          rng);
    } else {
      GuidedSite<T> site{nn::Conv2d<T>(w, 9 * w, 3, 1, rng), nn::Conv2d<T>(w, w, 1, 1, rng)};
      for (T& v : site.kernel_gen.weight.mutable_value().vec()) v *= T(0.1);
      guided.push_back(std::move(site));
    }
  }
  head = nn::Conv2d<T>(cfg.widths[0], 1, 3, 1, rng);
  for (T& v : head.weight.mutable_value().vec()) v *= T(0.1);
}

template <typename T>
void FDCNet<T>::collect(nn::ParamList<T>& out, const std::string& prefix) const {
  for (std::size_t l = 0; l < gray_enc.size(); ++l) {
    const std::string s = std::to_string(l);
    gray_enc[l].a.collect(prefix + ".gray_enc" + s + ".a", out);
    gray_enc[l].b.collect(prefix + ".gray_enc" + s + ".b", out);
    depth_enc[l].a.collect(prefix + ".depth_enc" + s + ".a", out);
    depth_enc[l].b.collect(prefix + ".depth_enc" + s + ".b", out);
  }
  for (std::size_t l = 0; l < gray_dec.size(); ++l) {
    gray_dec[l].collect(prefix + ".gray_dec" + std::to_string(l), out);
    depth_dec[l].collect(prefix + ".depth_dec" + std::to_string(l), out);
  }
  for (std::size_t l = 0; l < attention.size(); ++l) attention[l].collect(prefix + ".fuse" + std::to_string(l), out);
  for (std::size_t l = 0; l < guided.size(); ++l) {
    guided[l].kernel_gen.collect(prefix + ".guide" + std::to_string(l) + ".kernel", out);
    guided[l].mix.collect(prefix + ".guide" + std::to_string(l) + ".mix", out);
  }
  head.collect(prefix + ".head", out);
}

namespace {

template <typename T>
Var<T> encode(const EncoderLevel<T>& e, const Var<T>& x) {
  return nn::relu(e.b(nn::relu(e.a(x))));
}

template <typename T>
Var<T> decode_step(const nn::Conv2d<T>& conv, const Var<T>& coarse, const Var<T>& skip) {
  return nn::relu(conv(nn::concat_channels<T>({nn::upsample_nearest2x(coarse), skip})));
}

}  // namespace

template <typename T>
Var<T> fdcnet_forward(const Var<T>& gray, const Var<T>& pseudo_dense, const FDCNet<T>& m,
                      const fusion::FusionOptions& opts) {
  const FDCNetConfig& cfg = m.cfg;
  if (gray.shape() != pseudo_dense.shape() || gray.value().rank() != 4 || gray.dim(1) != 1)
    throw ShapeError("fdcnet: gray " + nn::shape_str(gray.shape()) + " and depth " +
                     nn::shape_str(pseudo_dense.shape()) + " must both be N x 1 x H x W");
  if (gray.dim(2) != cfg.height || gray.dim(3) != cfg.width)
    throw ShapeError("fdcnet: input " + nn::shape_str(gray.shape()) + " does not match configured " +
                     std::to_string(cfg.height) + "x" + std::to_string(cfg.width));
  const int L = cfg.levels();

  std::vector<Var<T>> ge(L), gd(L);
  for (int l = 0; l < L; ++l) ge[l] = encode(m.gray_enc[l], l == 0 ? gray : ge[l - 1]);
  gd[L - 1] = ge[L - 1];
  for (int l = L - 2; l >= 0; --l) gd[l] = decode_step(m.gray_dec[l], gd[l + 1], ge[l]);

  const Var<T> depth_in = nn::scale(pseudo_dense, T(1.0 / cfg.depth_scale));
  std::vector<Var<T>> fused(L);
  for (int l = 0; l < L; ++l) {
    const Var<T> de = encode(m.depth_enc[l], l == 0 ? depth_in : fused[l - 1]);
    if (cfg.fusion == FusionKind::Attention) {
      fused[l] = fusion::fuse(de, gd[l], m.attention[l], opts);
    } else {
      const GuidedSite<T>& g = m.guided[l];
      fused[l] = nn::add(de, g.mix(nn::dynamic_depthwise3x3(de, g.kernel_gen(gd[l]))));
    }
  }
  Var<T> dd = fused[L - 1];
  for (int l = L - 2; l >= 0; --l) dd = decode_step(m.depth_dec[l], dd, fused[l]);

  // Residual on the normalized input depth, kept nonnegative by softplus.
  const Var<T> pre = nn::add(depth_in, m.head(dd));
  return nn::scale(nn::softplus(pre, T(cfg.softplus_beta)), T(cfg.depth_scale));
}

template <typename T>
Var<T> guided_baseline_forward(const Var<T>& gray, const Var<T>& pseudo_dense, const FDCNet<T>& m) {
  if (m.cfg.fusion != FusionKind::Guided) throw ConfigError("guided baseline: model built with attention fusion");
  return fdcnet_forward(gray, pseudo_dense, m);
}

template <typename T>
Tensor<T> segment(const Tensor<T>& prob, double tau) {
  if (!(tau > 0 && tau < 1)) throw ConfigError("segment: tau must lie in (0, 1)");
  Tensor<T> m(prob.shape());
  for (std::size_t i = 0; i < prob.size(); ++i) m[i] = prob[i] >= T(tau) ? T(1) : T(0);
  return m;
}

#define SDC_INSTANTIATE_NETWORKS(T)                                                                      \
  template struct FSNet<T>;                                                                              \
  template struct FDCNet<T>;                                                                             \
  template Var<T> fsnet_forward(const Var<T>&, const Var<T>&, const FSNet<T>&);                          \
  template Var<T> fdcnet_forward(const Var<T>&, const Var<T>&, const FDCNet<T>&,                         \
                                 const fusion::FusionOptions&);                                          \
  template Var<T> guided_baseline_forward(const Var<T>&, const Var<T>&, const FDCNet<T>&);               \
  template Tensor<T> segment(const Tensor<T>&, double);

SDC_INSTANTIATE_NETWORKS(float)
SDC_INSTANTIATE_NETWORKS(double)

}  // namespace sdc::net
