#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdc {

/// Invalid configuration values (ranges, sizes, overlapping splits).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Tensor or image shapes that do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Missing, unreadable or corrupt files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// splitmix64 finalizer, used to derive independent per-worker seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                    std::uint64_t b = 0, std::uint64_t c = 0) {
  return mix_seed(mix_seed(mix_seed(seed ^ mix_seed(a)) ^ b) ^ mix_seed(c + 0x51ed27ULL));
}

/// Row-major single-channel image.
template <typename T>
struct Image {
  int height = 0;
  int width = 0;
  std::vector<T> pixels;

  Image() = default;
  Image(int h, int w, T fill = T{}) : height(h), width(w), pixels(std::size_t(h) * w, fill) {}

  T& operator()(int r, int c) { return pixels[std::size_t(r) * width + c]; }
  const T& operator()(int r, int c) const { return pixels[std::size_t(r) * width + c]; }
  std::size_t size() const { return pixels.size(); }
  bool empty() const { return pixels.empty(); }
  bool same_shape(const Image& o) const { return height == o.height && width == o.width; }
  template <typename U>
  bool same_shape(const Image<U>& o) const { return height == o.height && width == o.width; }

  bool operator==(const Image&) const = default;
};

using ImageF = Image<float>;
using Mask = Image<std::uint8_t>;

template <typename A, typename B>
void require_same_shape(const Image<A>& a, const Image<B>& b, const char* what) {
  if (a.height != b.height || a.width != b.width)
    throw ShapeError(std::string(what) + ": image shapes differ (" + std::to_string(a.height) +
                     "x" + std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                     std::to_string(b.width) + ")");
}

}  // namespace sdc
