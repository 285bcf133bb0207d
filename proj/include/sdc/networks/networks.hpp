#pragma once

#include <array>
#include <vector>

#include "sdc/fusion/fusion.hpp"
#include "sdc/nn/module.hpp"
#include "sdc/nn/ops.hpp"

namespace sdc::net {

using nn::Tensor;
using nn::Var;

inline constexpr int kFsnetConvLayers = 8;
inline constexpr std::size_t kFsnetMaxParams = 6000;

struct FSNetConfig {
  bool skips = true;          // U-Net style concatenations in the decoder
  double depth_scale = 250.0;  // sparse depth is divided by this on input
};

/// Foreground segmenter: 8 3x3 convolutions, two stride-2 stages and two
/// nearest-neighbour upsamplings. Input sides must be multiples of 4.
template <typename T>
struct FSNet {
  FSNetConfig cfg;
  std::array<nn::Conv2d<T>, kFsnetConvLayers> convs;

  FSNet() = default;
  FSNet(const FSNetConfig& cfg, Rng& rng);
  void collect(nn::ParamList<T>& out, const std::string& prefix = "fsnet") const;
};

/// gray, sparse: N x 1 x H x W (sparse in meters) -> foreground probability.
template <typename T>
Var<T> fsnet_forward(const Var<T>& gray, const Var<T>& sparse_depth, const FSNet<T>& model);

enum class FusionKind { Attention, Guided };

struct FDCNetConfig {
  std::vector<int> widths{16, 32, 64, 128};  // one encoder scale per entry
  int height = 128;
  int width = 128;
  int region = 4;  // region size at the coarsest fusion site
  int heads = 4;
  FusionKind fusion = FusionKind::Attention;
  bool use_cca = true;
  bool use_sa = true;
  double depth_scale = 250.0;
  double softplus_beta = 64.0;

  int levels() const { return static_cast<int>(widths.size()); }
  /// Region size at scale l; keeps the region grid identical at every site.
  int region_at(int level) const { return region << (levels() - 1 - level); }
  void validate() const;
};

template <typename T>
struct EncoderLevel {
  nn::Conv2d<T> a, b;
};

template <typename T>
struct GuidedSite {
  nn::Conv2d<T> kernel_gen;  // 3x3, C -> 9C, from gray features
  nn::Conv2d<T> mix;         // 1x1, C -> C
};

/// Two-branch encoder-decoder. Gray decoder features at each scale are
/// fused into the depth encoder at the same scale.
template <typename T>
struct FDCNet {
  FDCNetConfig cfg;
  std::vector<EncoderLevel<T>> gray_enc, depth_enc;
  std::vector<nn::Conv2d<T>> gray_dec, depth_dec;  // index l for l < L-1
  std::vector<fusion::FusionParams<T>> attention;
  std::vector<GuidedSite<T>> guided;
  nn::Conv2d<T> head;

  FDCNet() = default;
  FDCNet(const FDCNetConfig& cfg, Rng& rng);
  void collect(nn::ParamList<T>& out, const std::string& prefix = "fdcnet") const;
};

/// gray, pseudo_dense: N x 1 x H x W (depth in meters) -> depth >= 0 in
/// meters. Guided models ignore `opts`.
template <typename T>
Var<T> fdcnet_forward(const Var<T>& gray, const Var<T>& pseudo_dense, const FDCNet<T>& model,
                      const fusion::FusionOptions& opts = {});

/// Same network with FusionKind::Guided sites.
template <typename T>
Var<T> guided_baseline_forward(const Var<T>& gray, const Var<T>& pseudo_dense, const FDCNet<T>& model);

using nn::bce_loss;
using nn::masked_l1_loss;

/// 1 where prob >= tau, else 0. tau must lie in (0, 1).
template <typename T>
Tensor<T> segment(const Tensor<T>& prob, double tau = 0.5);

}  // namespace sdc::net
