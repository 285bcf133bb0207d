#include "sdc/harness/pointcloud.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "sdc/kernels/knn.hpp"

namespace sdc::harness {

PointCloud depth_to_pointcloud(const ImageF& depth, const Mask& mask, const synth::CameraModel& cam,
                               const ImageF* gray) {
  require_same_shape(depth, mask, "depth_to_pointcloud");
  if (gray) require_same_shape(depth, *gray, "depth_to_pointcloud");
  cam.validate();
  PointCloud pc;
  pc.has_intensity = gray != nullptr;
  for (int v = 0; v < depth.height; ++v)
    for (int u = 0; u < depth.width; ++u) {
      const float z = depth(v, u);
      if (!mask(v, u) || !(z > 0) || !std::isfinite(z)) continue;
      const Eigen::Vector3d p = cam.unproject(u, v, z);
      pc.points.push_back({p.x(), p.y(), p.z(), gray ? (*gray)(v, u) : 0.0f});
    }
  return pc;
}

OutlierRemovalResult statistical_outlier_removal(const PointCloud& cloud, int k, double std_ratio) {
  if (k < 1) throw ConfigError("outlier removal: k must be >= 1");
  if (!(std_ratio >= 0)) throw ConfigError("outlier removal: std_ratio must be >= 0");
  OutlierRemovalResult r;
  const std::size_t n = cloud.size();
  if (n <= std::size_t(k)) {
    std::cerr << "warning: outlier removal skipped, cloud has " << n << " points for k=" << k << "\n";
    r.cloud = cloud;
    r.skipped = true;
    return r;
  }
  std::vector<double> xyz(3 * n), dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    xyz[3 * i] = cloud.points[i].x;
    xyz[3 * i + 1] = cloud.points[i].y;
    xyz[3 * i + 2] = cloud.points[i].z;
  }
  kernels::knn_mean_distance(xyz, k, dist);
  double mean = 0;
  for (double d : dist) mean += d;
  mean /= n;
  double var = 0;
  for (double d : dist) var += (d - mean) * (d - mean);
  const double threshold = mean + std_ratio * std::sqrt(var / n);

  r.cloud.has_intensity = cloud.has_intensity;
  for (std::size_t i = 0; i < n; ++i)
    if (dist[i] <= threshold) r.cloud.points.push_back(cloud.points[i]);
  r.removed = n - r.cloud.size();
  return r;
}

void write_xyz(std::ostream& os, const PointCloud& cloud) {
  os << (cloud.has_intensity ? "# x y z intensity\n" : "# x y z\n");
  char buf[128];
  for (const Point& p : cloud.points) {
    if (cloud.has_intensity)
      std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f %.4f\n", p.x, p.y, p.z, p.intensity);
    else
      std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f\n", p.x, p.y, p.z);
    os << buf;
  }
}

void write_xyz(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  write_xyz(os, cloud);
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace sdc::harness
