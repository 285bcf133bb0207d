#pragma once

#include <span>

namespace sdc::kernels {

/// For each of the n points (xyz interleaved), the mean Euclidean distance
/// to its k nearest other points. Brute force, parallel over points.
/// Requires n > k.
void knn_mean_distance(std::span<const double> xyz, int k, std::span<double> out);

namespace reference {
/// Full sort of every distance row, serial.
void knn_mean_distance(std::span<const double> xyz, int k, std::span<double> out);
}  // namespace reference

}  // namespace sdc::kernels
