#pragma once

#include "sdc/common.hpp"
#include "sdc/synthgen/camera.hpp"
#include "sdc/synthgen/scene.hpp"

namespace sdc::synth {

struct RenderOptions {
  double ambient = 0.05;
  bool cast_shadows = true;   // single-bounce shadow ray towards the sun
  double star_density = 0.0;  // Bernoulli probability of a star on a background pixel
  double star_brightness_min = 0.15, star_brightness_max = 0.6;
  std::uint64_t star_seed = 0;
};

struct RenderResult {
  ImageF gray;        // [0, 1]
  ImageF depth;       // z-depth in m, 0 on background
  Mask mask;          // 1 on the satellite
};

/// Casts one ray per pixel center against the posed boxes. Rows are
/// rendered in parallel.
RenderResult render_scene(const SceneSpec& scene, const CameraModel& cam,
                          const RenderOptions& opt = {});

/// LIDAR grid geometry: the pixels hit by the scan pattern.
struct LidarPattern {
  int rays_h = 0;              // horizontal samples inside the image
  int rays_v = 0;              // vertical samples inside the image
  std::vector<int> pixels;     // unique row-major pixel indices, ascending
};

LidarPattern lidar_pattern(const CameraModel& cam, const LidarModel& lidar);

/// Simulates the co-located LIDAR: the scan grid is snapped to the
/// nearest image pixel and each return is cast through that pixel center.
/// Range noise is added along the ray and converted to z-depth.
ImageF sample_lidar(const SceneSpec& scene, const CameraModel& cam, const LidarModel& lidar,
                    Rng& rng);

}  // namespace sdc::synth
