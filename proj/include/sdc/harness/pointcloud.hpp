#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "sdc/common.hpp"
#include "sdc/synthgen/camera.hpp"

namespace sdc::harness {

struct Point {
  double x = 0, y = 0, z = 0;
  float intensity = 0;
};

/// Camera-frame points, meters.
struct PointCloud {
  std::vector<Point> points;
  bool has_intensity = false;

  std::size_t size() const { return points.size(); }
};

/// One point per masked pixel with positive depth. `gray`, when given,
/// fills the intensity channel.
PointCloud depth_to_pointcloud(const ImageF& depth, const Mask& mask, const synth::CameraModel& cam,
                               const ImageF* gray = nullptr);

struct OutlierRemovalResult {
  PointCloud cloud;
  std::size_t removed = 0;
  bool skipped = false;  // cloud had <= k points and was returned unchanged
};

/// Drops points whose mean k-nearest-neighbour distance exceeds
/// mean + std_ratio * stddev of that statistic over the cloud.
OutlierRemovalResult statistical_outlier_removal(const PointCloud& cloud, int k = 20, double std_ratio = 2.0);

/// ASCII "x y z [intensity]" per line after a one-line '#' header.
void write_xyz(std::ostream& os, const PointCloud& cloud);
void write_xyz(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace sdc::harness
