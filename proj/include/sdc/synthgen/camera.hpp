#pragma once

#include <Eigen/Core>

namespace sdc::synth {

/// Pinhole camera looking down +z, image u to the right and v down.
/// Square pixels; the principal point is the image center unless the
/// image has been cropped.
struct CameraModel {
  double focal_length = 0.050;   // m
  double sensor_size = 0.006449; // m, square sensor (width == height)
  int resolution = 1024;         // px, square image
  double cu = (1024 - 1) / 2.0;
  double cv = (1024 - 1) / 2.0;

  static CameraModel with_resolution(int resolution, double focal_length = 0.050,
                                     double sensor_size = 0.006449);

  double pixel_pitch() const { return sensor_size / resolution; }
  /// Focal length in pixels.
  double focal_px() const { return focal_length / pixel_pitch(); }
  /// Full field of view in degrees.
  double fov_deg() const;

  /// Image coordinates of a camera-frame point (z > 0).
  Eigen::Vector2d project(const Eigen::Vector3d& p) const;
  /// Camera-frame point at z-depth `z` behind pixel (u, v).
  Eigen::Vector3d unproject(double u, double v, double z) const;
  /// Unnormalized ray through (u, v) with unit z component, so the ray
  /// parameter equals z-depth.
  Eigen::Vector3d ray(double u, double v) const;

  void validate() const;
};

/// Co-located scanning LIDAR sharing the camera boresight.
struct LidarModel {
  double max_range = 280.0;         // m
  double range_error_sigma = 0.03;  // m, 1-sigma Gaussian
  double vertical_res_deg = 0.13;
  double horizontal_res_deg = 0.09;
  // Noise is truncated at this many sigmas, which bounds |sparse - dense|.
  double noise_clip_sigmas = 6.0;

  void validate() const;
};

}  // namespace sdc::synth
