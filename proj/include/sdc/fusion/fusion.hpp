#pragma once

#include <optional>
#include <vector>

#include "sdc/nn/module.hpp"

namespace sdc::fusion {

using nn::Var;

struct FusionConfig {
  int channels = 16;
  int height = 16;  // feature map size at the fusion site
  int width = 16;
  int region = 4;   // S
  int heads = 4;    // n
  bool use_cca = true;
  bool use_sa = true;

  int regions() const { return (height / region) * (width / region); }
  int embed_dim() const { return 3 * regions(); }  // d_k
  int head_dim() const { return embed_dim() / heads; }
  void validate() const;
};

/// Learned weights of one fusion site.
template <typename T>
struct FusionParams {
  FusionConfig cfg;
  nn::Conv2d<T> score_s;            // 1x1, C -> 1, region weighting of f_s
  nn::Conv2d<T> score_g;            // 1x1, C -> 1, region weighting of f_g
  std::vector<Var<T>> w_q, w_k;     // per head, 1 x d_k x d_k/n
  nn::Conv2d<T> combine;            // 1x1, nC -> C
  nn::Conv2d<T> spatial;            // 7x7, 4 -> 1

  FusionParams() = default;
  FusionParams(const FusionConfig& cfg, Rng& rng);
  void collect(const std::string& prefix, nn::ParamList<T>& out) const;
};

/// Test and ablation hooks.
struct FusionOptions {
  std::optional<double> forced_spatial_weight;  // replaces the learned gate
  bool zero_gray_features = false;              // f_g := 0 before fusing
};

/// Attention maps of the last call, one N x C x C tensor per head.
template <typename T>
struct AttentionTrace {
  std::vector<nn::Tensor<T>> omega;
};

/// N x C x H x W -> N x C x d_k: per region [max, mean, weighted mean].
template <typename T>
Var<T> embed_channels(const Var<T>& f, const nn::Conv2d<T>& score, int region);

template <typename T>
Var<T> cross_channel_attention(const Var<T>& f_s, const Var<T>& f_g, const FusionParams<T>& p,
                               AttentionTrace<T>* trace = nullptr);

/// Returns the gated mix; `weight_out` receives the N x 1 x H x W gate.
template <typename T>
Var<T> spatial_attention(const Var<T>& f_tilde_s, const Var<T>& f_g, const FusionParams<T>& p,
                         const FusionOptions& opts = {}, nn::Tensor<T>* weight_out = nullptr);

template <typename T>
Var<T> fuse(const Var<T>& f_s, const Var<T>& f_g, const FusionParams<T>& p, const FusionOptions& opts = {},
            AttentionTrace<T>* trace = nullptr);

}  // namespace sdc::fusion
