#include "sdc/preprocess/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "sdc/kernels/densify.hpp"

namespace sdc::prep {
namespace {

template <typename T>
void flip_plane(Image<T>& img) {
  for (int r = 0; r < img.height; ++r) {
    auto row = img.pixels.begin() + std::ptrdiff_t(r) * img.width;
    std::reverse(row, row + img.width);
  }
}

template <typename T>
Image<T> crop_plane(const Image<T>& img, int y0, int x0, int size) {
  if (img.empty()) return img;
  Image<T> out(size, size);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) out(r, c) = img(y0 + r, x0 + c);
  return out;
}

template <typename T>
Image<T> resize_nearest(const Image<T>& img, int size) {
  if (img.empty()) return img;
  Image<T> out(size, size);
  for (int r = 0; r < size; ++r) {
    const int sr = std::min(img.height - 1, static_cast<int>((r + 0.5) * img.height / size));
    for (int c = 0; c < size; ++c) {
      const int sc = std::min(img.width - 1, static_cast<int>((c + 0.5) * img.width / size));
      out(r, c) = img(sr, sc);
    }
  }
  return out;
}

ImageF resize_bilinear(const ImageF& img, int size) {
  ImageF out(size, size);
  const double sy = double(img.height) / size, sx = double(img.width) / size;
  for (int r = 0; r < size; ++r) {
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, double(img.height - 1));
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, img.height - 1);
    const double ay = fy - y0;
    for (int c = 0; c < size; ++c) {
      const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, double(img.width - 1));
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, img.width - 1);
      const double ax = fx - x0;
      const double top = (1 - ax) * img(y0, x0) + ax * img(y0, x1);
      const double bot = (1 - ax) * img(y1, x0) + ax * img(y1, x1);
      out(r, c) = static_cast<float>((1 - ay) * top + ay * bot);
    }
  }
  return out;
}

}  // namespace

void PreprocessConfig::validate() const {
  if (densify_kernel < 3 || densify_kernel % 2 == 0)
    throw ConfigError("preprocess: densify_kernel must be odd and >= 3");
  if (densify_iterations < 0) throw ConfigError("preprocess: densify_iterations must be >= 0");
  if (train_size <= 0 || downsampling_levels < 0 || train_size % (1 << downsampling_levels) != 0)
    throw ConfigError("preprocess: train_size must be a positive multiple of 2^levels");
  if (flip_prob < 0 || flip_prob > 1) throw ConfigError("preprocess: flip_prob must be in [0,1]");
  if (jitter_brightness < 0 || jitter_brightness >= 1 || jitter_contrast < 0 || jitter_contrast >= 1)
    throw ConfigError("preprocess: jitter ranges must be in [0,1)");
}

DensifyResult densify_morphological(const ImageF& sparse, int kernel, int iterations) {
  if (kernel < 3 || kernel % 2 == 0) throw ConfigError("densify: kernel must be odd and >= 3");
  DensifyResult res{sparse, false};
  res.empty = std::none_of(sparse.pixels.begin(), sparse.pixels.end(), [](float v) { return v > 0.f; });
  if (res.empty) return res;
  ImageF next(sparse.height, sparse.width);
  for (int it = 0; it < iterations; ++it) {
    kernels::min_fill_pass(res.pseudo_dense.pixels, next.pixels, sparse.height, sparse.width, kernel);
    std::swap(res.pseudo_dense.pixels, next.pixels);
  }
  return res;
}

DensifyResult densify_morphological(const ImageF& sparse, const PreprocessConfig& cfg) {
  return densify_morphological(sparse, cfg.densify_kernel, cfg.densify_iterations);
}

void attach_pseudo_dense(synth::Sample& s, const PreprocessConfig& cfg) {
  s.pseudo_dense = densify_morphological(s.sparse_depth, cfg).pseudo_dense;
}

void flip_horizontal(synth::Sample& s) {
  flip_plane(s.gray);
  flip_plane(s.sparse_depth);
  flip_plane(s.pseudo_dense);
  flip_plane(s.dense_depth_gt);
  flip_plane(s.fg_mask_gt);
  s.intrinsics.cu = s.gray.width - 1 - s.intrinsics.cu;
}

void augment(synth::Sample& s, Rng& rng, const PreprocessConfig& cfg) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (u01(rng) < cfg.flip_prob) flip_horizontal(s);
  auto factor = [&](double range) {
    return range > 0 ? std::uniform_real_distribution<double>(1 - range, 1 + range)(rng) : 1.0;
  };
  const double b = factor(cfg.jitter_brightness);
  const double c = factor(cfg.jitter_contrast);
  if (b == 1.0 && c == 1.0) return;
  double mean = 0;
  for (float v : s.gray.pixels) mean += v;
  mean /= std::max<std::size_t>(1, s.gray.size());
  // c*b*g + (1-c)*mean: contrast about the mean after brightness scaling.
  for (float& v : s.gray.pixels)
    v = static_cast<float>(std::clamp(c * b * v + (1 - c) * mean * b, 0.0, 1.0));
}

synth::Sample crop_resize(const synth::Sample& s, int size, ResizeMode mode, Rng& rng) {
  if (size <= 0) throw ConfigError("crop_resize: size must be positive");
  const int h = s.gray.height, w = s.gray.width;
  if (size == h && size == w) return s;
  synth::Sample out = s;
  if (mode == ResizeMode::Crop) {
    if (size > h || size > w)
      throw ConfigError("crop_resize: crop size " + std::to_string(size) + " exceeds image " +
                        std::to_string(h) + "x" + std::to_string(w));
    const int y0 = std::uniform_int_distribution<int>(0, h - size)(rng);
    const int x0 = std::uniform_int_distribution<int>(0, w - size)(rng);
    out.gray = crop_plane(s.gray, y0, x0, size);
    out.sparse_depth = crop_plane(s.sparse_depth, y0, x0, size);
    out.pseudo_dense = crop_plane(s.pseudo_dense, y0, x0, size);
    out.dense_depth_gt = crop_plane(s.dense_depth_gt, y0, x0, size);
    out.fg_mask_gt = crop_plane(s.fg_mask_gt, y0, x0, size);
    out.intrinsics.sensor_size = s.intrinsics.sensor_size * size / w;
    out.intrinsics.resolution = size;
    out.intrinsics.cu = s.intrinsics.cu - x0;
    out.intrinsics.cv = s.intrinsics.cv - y0;
    return out;
  }
  out.gray = resize_bilinear(s.gray, size);
  out.sparse_depth = resize_nearest(s.sparse_depth, size);
  out.pseudo_dense = resize_nearest(s.pseudo_dense, size);
  out.dense_depth_gt = resize_nearest(s.dense_depth_gt, size);
  out.fg_mask_gt = resize_nearest(s.fg_mask_gt, size);
  const double scale = double(size) / w;
  out.intrinsics.resolution = size;
  out.intrinsics.cu = (s.intrinsics.cu + 0.5) * scale - 0.5;
  out.intrinsics.cv = (s.intrinsics.cv + 0.5) * scale - 0.5;
  return out;
}

}  // namespace sdc::prep
