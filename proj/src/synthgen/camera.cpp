#include "sdc/synthgen/camera.hpp"

#include <cmath>
#include <numbers>

#include "sdc/common.hpp"

namespace sdc::synth {

CameraModel CameraModel::with_resolution(int resolution, double focal_length,
                                         double sensor_size) {
  CameraModel cam;
  cam.focal_length = focal_length;
  cam.sensor_size = sensor_size;
  cam.resolution = resolution;
  cam.cu = (resolution - 1) / 2.0;
  cam.cv = (resolution - 1) / 2.0;
  cam.validate();
  return cam;
}

double CameraModel::fov_deg() const {
  return 2.0 * std::atan(sensor_size / 2.0 / focal_length) * 180.0 / std::numbers::pi;
}

Eigen::Vector2d CameraModel::project(const Eigen::Vector3d& p) const {
  const double f = focal_px();
  return {cu + f * p.x() / p.z(), cv + f * p.y() / p.z()};
}

Eigen::Vector3d CameraModel::unproject(double u, double v, double z) const {
  const double f = focal_px();
  return {(u - cu) * z / f, (v - cv) * z / f, z};
}

Eigen::Vector3d CameraModel::ray(double u, double v) const {
  const double f = focal_px();
  return {(u - cu) / f, (v - cv) / f, 1.0};
}

void CameraModel::validate() const {
  if (!(focal_length > 0) || !(sensor_size > 0) || resolution <= 0)
    throw ConfigError("camera: focal length, sensor size and resolution must be positive");
}

void LidarModel::validate() const {
  if (!(max_range > 0)) throw ConfigError("lidar: max_range must be > 0");
  if (!(range_error_sigma >= 0)) throw ConfigError("lidar: range_error_sigma must be >= 0");
  if (!(vertical_res_deg > 0) || !(horizontal_res_deg > 0))
    throw ConfigError("lidar: angular resolutions must be > 0");
  if (!(noise_clip_sigmas > 0)) throw ConfigError("lidar: noise_clip_sigmas must be > 0");
}

}  // namespace sdc::synth
