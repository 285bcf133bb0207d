#pragma once

#include <filesystem>

#include "sdc/common.hpp"

namespace sdc::io {

/// Depth file: magic "SDCF", u16 height, u16 width (little-endian), then
/// height*width little-endian float32 meters, row-major.
void write_depth(const std::filesystem::path& path, const ImageF& depth);
ImageF read_depth(const std::filesystem::path& path);

/// 8-bit grayscale PNG. Values in [0,1] are rounded to the nearest level.
void write_gray_png(const std::filesystem::path& path, const ImageF& gray);
ImageF read_gray_png(const std::filesystem::path& path);

/// Mask PNG stored as 0/255.
void write_mask_png(const std::filesystem::path& path, const Mask& mask);
Mask read_mask_png(const std::filesystem::path& path);

/// Quantizes to the 8-bit levels the PNG stores.
ImageF quantize8(const ImageF& gray);

}  // namespace sdc::io
