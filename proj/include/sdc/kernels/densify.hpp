#pragma once

#include <span>

namespace sdc::kernels {

/// One min-fill pass: every pixel <= 0 takes the minimum positive value
/// inside its k x k window (0 if none); positive pixels are copied.
/// Separable running minimum, rows and columns in parallel.
void min_fill_pass(std::span<const float> in, std::span<float> out, int height, int width, int k);

namespace reference {
/// Direct window scan, serial.
void min_fill_pass(std::span<const float> in, std::span<float> out, int height, int width, int k);
}  // namespace reference

}  // namespace sdc::kernels
