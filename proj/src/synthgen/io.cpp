#include "sdc/synthgen/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace sdc::io {
namespace {

constexpr std::array<char, 4> kDepthMagic{'S', 'D', 'C', 'F'};

void put_u16(std::ostream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

std::uint16_t get_u16(const unsigned char* b) { return std::uint16_t(b[0] | (b[1] << 8)); }

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_png8(const std::filesystem::path& path, int h, int w, const std::vector<std::uint8_t>& px) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed: " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < h; ++r)
    png_write_row(png, const_cast<png_bytep>(px.data() + std::size_t(r) * w));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(fp.get()) != 0) throw IoError("png flush failed: " + path.string());
}

std::vector<std::uint8_t> read_png8(const std::filesystem::path& path, int& h, int& w) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open: " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw IoError("not a PNG file: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng init failed: " + path.string());
  }
  std::vector<std::uint8_t> px;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  w = static_cast<int>(png_get_image_width(png, info));
  h = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);
  px.resize(std::size_t(h) * w);
  for (int r = 0; r < h; ++r) png_read_row(png, px.data() + std::size_t(r) * w, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return px;
}

std::uint8_t to_u8(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
}

}  // namespace

void write_depth(const std::filesystem::path& path, const ImageF& depth) {
  if (depth.height > 0xffff || depth.width > 0xffff) throw ShapeError("depth image too large for SDCF");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kDepthMagic.data(), 4);
  put_u16(os, static_cast<std::uint16_t>(depth.height));
  put_u16(os, static_cast<std::uint16_t>(depth.width));
  static_assert(sizeof(float) == 4);
  for (float v : depth.pixels) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    const unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
  }
  os.flush();
  if (!os) throw IoError("write failed: " + path.string());
}

ImageF read_depth(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  unsigned char hdr[8];
  if (!is.read(reinterpret_cast<char*>(hdr), 8) || std::memcmp(hdr, kDepthMagic.data(), 4) != 0)
    throw IoError("bad SDCF header: " + path.string());
  ImageF img(get_u16(hdr + 4), get_u16(hdr + 6));
  std::vector<unsigned char> buf(img.size() * 4);
  if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw IoError("truncated SDCF payload: " + path.string());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const unsigned char* b = buf.data() + 4 * i;
    const std::uint32_t bits = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
                               (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
    img.pixels[i] = std::bit_cast<float>(bits);
  }
  return img;
}

void write_gray_png(const std::filesystem::path& path, const ImageF& gray) {
  std::vector<std::uint8_t> px(gray.size());
  std::transform(gray.pixels.begin(), gray.pixels.end(), px.begin(), to_u8);
  write_png8(path, gray.height, gray.width, px);
}

ImageF read_gray_png(const std::filesystem::path& path) {
  int h = 0, w = 0;
  const auto px = read_png8(path, h, w);
  ImageF img(h, w);
  for (std::size_t i = 0; i < px.size(); ++i) img.pixels[i] = px[i] / 255.f;
  return img;
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> px(mask.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = mask.pixels[i] ? 255 : 0;
  write_png8(path, mask.height, mask.width, px);
}

Mask read_mask_png(const std::filesystem::path& path) {
  int h = 0, w = 0;
  const auto px = read_png8(path, h, w);
  Mask m(h, w);
  for (std::size_t i = 0; i < px.size(); ++i) m.pixels[i] = px[i] >= 128 ? 1 : 0;
  return m;
}

ImageF quantize8(const ImageF& gray) {
  ImageF q = gray;
  for (float& v : q.pixels) v = to_u8(v) / 255.f;
  return q;
}

}  // namespace sdc::io
