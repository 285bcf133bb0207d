#include "sdc/synthgen/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sdc::synth {

RenderResult render_scene(const SceneSpec& scene, const CameraModel& cam, const RenderOptions& opt) {
  const int n = cam.resolution;
  RenderResult out{ImageF(n, n, 0.f), ImageF(n, n, 0.f), Mask(n, n, 0)};
  const std::vector<WorldBox> boxes = pose_scene(scene);
  const Eigen::Vector3d sun = scene.sun_direction.normalized();
  const Eigen::Vector3d origin = Eigen::Vector3d::Zero();

#pragma omp parallel for schedule(dynamic, 4)
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const Eigen::Vector3d dir = cam.ray(c, r);
      const auto hit = intersect(boxes, origin, dir);
      if (!hit) {
        if (opt.star_density > 0) {
          Rng px(derive_seed(opt.star_seed, std::uint64_t(r) * n + c, 0x57a7));
          if (std::uniform_real_distribution<double>(0, 1)(px) < opt.star_density)
            out.gray(r, c) = static_cast<float>(std::uniform_real_distribution<double>(
                opt.star_brightness_min, opt.star_brightness_max)(px));
        }
        continue;
      }
      double lambert = std::max(0.0, hit->normal.dot(sun));
      if (lambert > 0 && opt.cast_shadows) {
        const Eigen::Vector3d p = origin + hit->t * dir + 1e-6 * hit->normal;
        if (intersect(boxes, p, sun, 1e-9)) lambert = 0;
      }
      const double g = boxes[hit->part].albedo * lambert + opt.ambient;
      out.gray(r, c) = static_cast<float>(std::clamp(g, 0.0, 1.0));
      out.depth(r, c) = static_cast<float>(hit->t);
      out.mask(r, c) = 1;
    }
  }
  return out;
}

LidarPattern lidar_pattern(const CameraModel& cam, const LidarModel& lidar) {
  lidar.validate();
  constexpr double kDeg = std::numbers::pi / 180.0;
  const int n = cam.resolution;
  const double half_fov = cam.fov_deg() / 2.0;
  const int kh = static_cast<int>(std::floor(half_fov / lidar.horizontal_res_deg)) + 1;
  const int kv = static_cast<int>(std::floor(half_fov / lidar.vertical_res_deg)) + 1;
  auto inside = [n](double x) { return x >= -0.5 && x < n - 0.5; };

  LidarPattern pat;
  for (int i = -kh; i <= kh; ++i) {
    const double az = i * lidar.horizontal_res_deg * kDeg;
    if (inside(cam.project({std::sin(az), 0, std::cos(az)}).x())) ++pat.rays_h;
  }
  for (int j = -kv; j <= kv; ++j) {
    const double el = j * lidar.vertical_res_deg * kDeg;
    if (inside(cam.project({0, std::sin(el), std::cos(el)}).y())) ++pat.rays_v;
  }
  for (int j = -kv; j <= kv; ++j) {
    const double el = j * lidar.vertical_res_deg * kDeg;
    for (int i = -kh; i <= kh; ++i) {
      const double az = i * lidar.horizontal_res_deg * kDeg;
      const Eigen::Vector3d d(std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az));
      const Eigen::Vector2d uv = cam.project(d);
      if (!inside(uv.x()) || !inside(uv.y())) continue;
      const int c = static_cast<int>(std::lround(uv.x()));
      const int r = static_cast<int>(std::lround(uv.y()));
      pat.pixels.push_back(r * n + c);
    }
  }
  std::sort(pat.pixels.begin(), pat.pixels.end());
  pat.pixels.erase(std::unique(pat.pixels.begin(), pat.pixels.end()), pat.pixels.end());
  return pat;
}

ImageF sample_lidar(const SceneSpec& scene, const CameraModel& cam, const LidarModel& lidar, Rng& rng) {
  const LidarPattern pat = lidar_pattern(cam, lidar);
  const int n = cam.resolution;
  ImageF sparse(n, n, 0.f);
  const std::vector<WorldBox> boxes = pose_scene(scene);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double clip = lidar.noise_clip_sigmas;

  for (int idx : pat.pixels) {
    const int r = idx / n, c = idx % n;
    const Eigen::Vector3d dir = cam.ray(c, r);
    const auto hit = intersect(boxes, Eigen::Vector3d::Zero(), dir);
    if (!hit) continue;
    const double len = dir.norm();
    if (hit->t * len > lidar.max_range) continue;
    double z = hit->t;
    if (lidar.range_error_sigma > 0) {
      const double e = std::clamp(noise(rng), -clip, clip) * lidar.range_error_sigma;
      z += e / len;
    }
    // Scan points mapping to one pixel share its center ray; keep the nearer.
    float& px = sparse(r, c);
    const float zf = static_cast<float>(z);
    if (px == 0.f || zf < px) px = zf;
  }
  return sparse;
}

}  // namespace sdc::synth
