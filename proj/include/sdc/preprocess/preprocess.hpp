#pragma once

#include "sdc/common.hpp"
#include "sdc/synthgen/dataset.hpp"

namespace sdc::prep {

struct PreprocessConfig {
  int densify_kernel = 5;      // odd, >= 3
  int densify_iterations = 3;
  int train_size = 128;        // must be a multiple of 2^downsampling levels
  int downsampling_levels = 3;
  double flip_prob = 0.5;
  double jitter_brightness = 0.1;  // gray *= U[1-b, 1+b]
  double jitter_contrast = 0.1;    // gray contrast about its mean, U[1-c, 1+c]

  void validate() const;
};

struct DensifyResult {
  ImageF pseudo_dense;
  bool empty = false;  // input had no valid pixel
};

/// Iterated min-fill dilation. Valid input pixels are returned unchanged;
/// holes next to measurements take the nearest-surface (minimum) depth.
DensifyResult densify_morphological(const ImageF& sparse, int kernel = 5, int iterations = 3);
DensifyResult densify_morphological(const ImageF& sparse, const PreprocessConfig& cfg);

/// Fills `s.pseudo_dense` from its sparse depth.
void attach_pseudo_dense(synth::Sample& s, const PreprocessConfig& cfg);

/// Random horizontal flip of every plane, then brightness/contrast jitter
/// of the gray image only.
void augment(synth::Sample& s, Rng& rng, const PreprocessConfig& cfg);

void flip_horizontal(synth::Sample& s);

enum class ResizeMode { Crop, Resize };

/// Crop picks a seeded random window; resize uses nearest neighbour for
/// depth and mask planes and bilinear for gray. Intrinsics follow.
synth::Sample crop_resize(const synth::Sample& s, int size, ResizeMode mode, Rng& rng);

}  // namespace sdc::prep
