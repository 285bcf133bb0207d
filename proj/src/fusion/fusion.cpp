#include "sdc/fusion/fusion.hpp"

#include <cmath>

#include "sdc/nn/ops.hpp"

namespace sdc::fusion {

using nn::Shape;
using nn::Tensor;

void FusionConfig::validate() const {
  if (channels <= 0 || height <= 0 || width <= 0) throw ConfigError("fusion: non-positive feature shape");
  if (region <= 0) throw ConfigError("fusion: region size must be positive");
  if (height % region != 0 || width % region != 0)
    throw ShapeError("fusion: region size " + std::to_string(region) + " does not divide " +
                     std::to_string(height) + "x" + std::to_string(width));
  if (heads <= 0 || embed_dim() % heads != 0)
    throw ConfigError("fusion: embedding size " + std::to_string(embed_dim()) + " not divisible by " +
                      std::to_string(heads) + " heads");
}

template <typename T>
FusionParams<T>::FusionParams(const FusionConfig& c, Rng& rng) : cfg(c) {
  cfg.validate();
  const int ch = cfg.channels, dk = cfg.embed_dim(), dh = cfg.head_dim();
  score_s = nn::Conv2d<T>(ch, 1, 1, 1, rng);
  score_g = nn::Conv2d<T>(ch, 1, 1, 1, rng);
  for (int i = 0; i < cfg.heads; ++i) {
    w_q.push_back(nn::normal_param<T>({1, dk, dh}, 1.0 / std::sqrt(double(dk)), rng));
    w_k.push_back(nn::normal_param<T>({1, dk, dh}, 1.0 / std::sqrt(double(dk)), rng));
  }
  // Start the head mix as the mean over heads, plus a small perturbation.
  combine = nn::Conv2d<T>(cfg.heads * ch, ch, 1, 1, rng);
  Tensor<T>& w = combine.weight.mutable_value();
  for (T& v : w.vec()) v *= T(0.1);
  for (int o = 0; o < ch; ++o)
    for (int i = 0; i < cfg.heads; ++i) w[std::size_t(o) * cfg.heads * ch + i * ch + o] += T(1.0 / cfg.heads);
  spatial = nn::Conv2d<T>(4, 1, 7, 1, rng);
  for (T& v : spatial.weight.mutable_value().vec()) v *= T(0.1);
}

template <typename T>
void FusionParams<T>::collect(const std::string& prefix, nn::ParamList<T>& out) const {
  score_s.collect(prefix + ".score_s", out);
  score_g.collect(prefix + ".score_g", out);
  for (std::size_t i = 0; i < w_q.size(); ++i) {
    out.push_back({prefix + ".w_q" + std::to_string(i), w_q[i]});
    out.push_back({prefix + ".w_k" + std::to_string(i), w_k[i]});
  }
  combine.collect(prefix + ".combine", out);
  spatial.collect(prefix + ".spatial", out);
}

template <typename T>
Var<T> embed_channels(const Var<T>& f, const nn::Conv2d<T>& score, int region) {
  if (f.value().rank() != 4) throw ShapeError("embed_channels: expected N x C x H x W");
  if (region <= 0 || f.dim(2) % region != 0 || f.dim(3) % region != 0)
    throw ShapeError("embed_channels: region size " + std::to_string(region) + " does not divide " +
                     std::to_string(f.dim(2)) + "x" + std::to_string(f.dim(3)));
  return nn::region_embed(f, score(f), region);
}

namespace {

void check_pair(const Shape& s, const Shape& g, const FusionConfig& cfg) {
  if (s != g) throw ShapeError("fusion: f_s " + nn::shape_str(s) + " and f_g " + nn::shape_str(g) + " differ");
  if (s.size() != 4 || s[1] != cfg.channels || s[2] != cfg.height || s[3] != cfg.width)
    throw ShapeError("fusion: input " + nn::shape_str(s) + " does not match site configuration");
}

}  // namespace

template <typename T>
Var<T> cross_channel_attention(const Var<T>& f_s, const Var<T>& f_g, const FusionParams<T>& p,
                               AttentionTrace<T>* trace) {
  const FusionConfig& cfg = p.cfg;
  check_pair(f_s.shape(), f_g.shape(), cfg);
  const int n = f_s.dim(0), c = cfg.channels, hw = cfg.height * cfg.width;
  const T inv_sqrt_dk = T(1) / std::sqrt(T(cfg.embed_dim()));

  const Var<T> e_s = embed_channels(f_s, p.score_s, cfg.region);
  const Var<T> e_g = embed_channels(f_g, p.score_g, cfg.region);
  const Var<T> fs_v = nn::reshape(f_s, {n, c, hw});
  const Var<T> fg_v = nn::reshape(f_g, {n, c, hw});

  if (trace) trace->omega.clear();
  std::vector<Var<T>> heads;
  for (int i = 0; i < cfg.heads; ++i) {
    const Var<T> q = nn::matmul(e_s, p.w_q[i]);
    const Var<T> k = nn::matmul(e_g, p.w_k[i]);
    const Var<T> omega = nn::softmax_lastdim(nn::scale(nn::matmul_nt(q, k), inv_sqrt_dk));
    if (trace) trace->omega.push_back(omega.value());
    const Var<T> head = nn::add(fs_v, nn::matmul(omega, fg_v));
    heads.push_back(nn::reshape(head, {n, c, cfg.height, cfg.width}));
  }
  return p.combine(nn::concat_channels(heads));
}

template <typename T>
Var<T> spatial_attention(const Var<T>& f_tilde_s, const Var<T>& f_g, const FusionParams<T>& p,
                         const FusionOptions& opts, Tensor<T>* weight_out) {
  check_pair(f_tilde_s.shape(), f_g.shape(), p.cfg);
  Var<T> gate;
  if (opts.forced_spatial_weight) {
    const double w = *opts.forced_spatial_weight;
    if (w < 0 || w > 1) throw ConfigError("fusion: forced spatial weight outside [0, 1]");
    gate = nn::constant(Tensor<T>({f_g.dim(0), 1, f_g.dim(2), f_g.dim(3)}, T(w)));
  } else {
    const Var<T> desc = nn::concat_channels<T>({nn::channel_max(f_tilde_s), nn::channel_mean(f_tilde_s),
                                                nn::channel_max(f_g), nn::channel_mean(f_g)});
    gate = nn::sigmoid(p.spatial(desc));
  }
  if (weight_out) *weight_out = gate.value();
  return nn::spatial_gate(gate, f_tilde_s, f_g);
}

template <typename T>
Var<T> fuse(const Var<T>& f_s, const Var<T>& f_g_in, const FusionParams<T>& p, const FusionOptions& opts,
            AttentionTrace<T>* trace) {
  const Var<T> f_g = opts.zero_gray_features ? nn::constant(Tensor<T>(f_g_in.shape())) : f_g_in;
  const Var<T> f_tilde = p.cfg.use_cca ? cross_channel_attention(f_s, f_g, p, trace) : f_s;
  if (!p.cfg.use_sa && !opts.forced_spatial_weight) return f_tilde;
  return spatial_attention(f_tilde, f_g, p, opts);
}

#define SDC_INSTANTIATE_FUSION(T)                                                                          \
  template struct FusionParams<T>;                                                                         \
  template Var<T> embed_channels(const Var<T>&, const nn::Conv2d<T>&, int);                                \
  template Var<T> cross_channel_attention(const Var<T>&, const Var<T>&, const FusionParams<T>&,            \
                                          AttentionTrace<T>*);                                             \
  template Var<T> spatial_attention(const Var<T>&, const Var<T>&, const FusionParams<T>&,                  \
                                    const FusionOptions&, Tensor<T>*);                                     \
  template Var<T> fuse(const Var<T>&, const Var<T>&, const FusionParams<T>&, const FusionOptions&,         \
                       AttentionTrace<T>*);

SDC_INSTANTIATE_FUSION(float)
SDC_INSTANTIATE_FUSION(double)

}  // namespace sdc::fusion
