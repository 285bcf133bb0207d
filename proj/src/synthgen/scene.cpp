#include "sdc/synthgen/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace sdc::synth {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kPanelGap = 0.2;  // m between body face and panel root

void check_range(double lo, double hi, double lim_lo, double lim_hi, const char* name) {
  if (!(lo <= hi))
    throw ConfigError(std::string("scene config: ") + name + " range has min > max");
  if (lo < lim_lo || hi > lim_hi)
    throw ConfigError(std::string("scene config: ") + name + " range [" + std::to_string(lo) +
                      ", " + std::to_string(hi) + "] outside [" + std::to_string(lim_lo) + ", " +
                      std::to_string(lim_hi) + "]");
}

double uniform(Rng& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::Quaterniond random_rotation(Rng& rng) {
  std::normal_distribution<double> n01;
  Eigen::Vector4d q;
  do {
    q = {n01(rng), n01(rng), n01(rng), n01(rng)};
  } while (q.norm() < 1e-9);
  q.normalize();
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
}

}  // namespace

void SceneConfig::validate() const {
  check_range(distance_min, distance_max, 50.0, 250.0, "distance");
  check_range(body_half_min, body_half_max, 0.5, 1.5, "body half extent");
  check_range(panel_span_min, panel_span_max, 3.0, 8.0, "panel span");
  check_range(panel_width_min, panel_width_max, 1e-3, 1e3, "panel width");
  check_range(0.0, sun_max_angle_deg, 0.0, 70.0, "sun angle");
  check_range(0.0, antenna_probability, 0.0, 1.0, "antenna probability");
  check_range(body_albedo_min, body_albedo_max, 0.0, 1.0, "body albedo");
  check_range(panel_albedo_min, panel_albedo_max, 0.0, 1.0, "panel albedo");
  if (!(panel_thickness > 0)) throw ConfigError("scene config: panel thickness must be > 0");
}

double SceneSpec::sun_angle_deg() const {
  const double c = std::clamp(sun_direction.normalized().dot(Eigen::Vector3d(0, 0, -1)), -1.0, 1.0);
  return std::acos(c) / kDeg;
}

void SceneSpec::validate(const SceneConfig& cfg) const {
  if (distance < cfg.distance_min || distance > cfg.distance_max)
    throw ConfigError("scene: distance " + std::to_string(distance) + " out of range");
  if (sun_angle_deg() > cfg.sun_max_angle_deg + 1e-9)
    throw ConfigError("scene: sun angle exceeds limit");
  if (model.parts.empty()) throw ConfigError("scene: satellite has no parts");
  for (int i = 0; i < 3; ++i)
    if (model.body_half_extents[i] < cfg.body_half_min || model.body_half_extents[i] > cfg.body_half_max)
      throw ConfigError("scene: body half extent out of range");
  for (double s : model.panel_spans)
    if (s < cfg.panel_span_min || s > cfg.panel_span_max)
      throw ConfigError("scene: panel span out of range");
}

SatelliteModel sample_model(Rng& rng, const SceneConfig& cfg, int model_id) {
  cfg.validate();
  SatelliteModel m;
  m.model_id = model_id;
  for (int i = 0; i < 3; ++i) m.body_half_extents[i] = uniform(rng, cfg.body_half_min, cfg.body_half_max);

  Box body;
  body.half_extents = m.body_half_extents;
  body.albedo = uniform(rng, cfg.body_albedo_min, cfg.body_albedo_max);
  m.parts.push_back(body);

  const int n_panels = std::bernoulli_distribution(0.7)(rng) ? 2 : 1;
  const double span = uniform(rng, cfg.panel_span_min, cfg.panel_span_max);
  const double width = uniform(rng, cfg.panel_width_min, cfg.panel_width_max);
  const double tilt = uniform(rng, 0.0, std::numbers::pi);
  const double panel_albedo = uniform(rng, cfg.panel_albedo_min, cfg.panel_albedo_max);
  for (int p = 0; p < n_panels; ++p) {
    const double side = p == 0 ? 1.0 : -1.0;
    Box panel;
    panel.half_extents = {span / 2, width / 2, cfg.panel_thickness / 2};
    panel.center = {side * (m.body_half_extents.x() + kPanelGap + span / 2), 0, 0};
    panel.orientation = Eigen::Quaterniond(Eigen::AngleAxisd(tilt, Eigen::Vector3d::UnitX()));
    panel.albedo = panel_albedo;
    m.parts.push_back(panel);
    m.panel_spans.push_back(span);
  }

  m.has_antenna = std::bernoulli_distribution(cfg.antenna_probability)(rng);
  if (m.has_antenna) {
    const double len = uniform(rng, 1.0, 2.5);
    Box mast;
    mast.half_extents = {0.08, 0.08, len / 2};
    mast.center = {0, 0, m.body_half_extents.z() + len / 2};
    mast.albedo = uniform(rng, cfg.body_albedo_min, cfg.body_albedo_max);
    m.parts.push_back(mast);
  }
  return m;
}

SceneSpec sample_view(Rng& rng, const SceneConfig& cfg, SatelliteModel model) {
  cfg.validate();
  SceneSpec s;
  s.model = std::move(model);
  s.attitude = random_rotation(rng);
  s.distance = uniform(rng, cfg.distance_min, cfg.distance_max);
  // Uniform on the spherical cap around the camera direction.
  const double cos_max = std::cos(cfg.sun_max_angle_deg * kDeg);
  const double cos_t = uniform(rng, cos_max, 1.0);
  const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
  const double phi = uniform(rng, 0.0, 2 * std::numbers::pi);
  s.sun_direction = Eigen::Vector3d(sin_t * std::cos(phi), sin_t * std::sin(phi), -cos_t).normalized();
  return s;
}

SceneSpec sample_scene(Rng& rng, const SceneConfig& cfg, int model_id) {
  SatelliteModel m = sample_model(rng, cfg, model_id);
  return sample_view(rng, cfg, std::move(m));
}

std::vector<WorldBox> pose_scene(const SceneSpec& scene) {
  const Eigen::Matrix3d att = scene.attitude.normalized().toRotationMatrix();
  const Eigen::Vector3d origin(0, 0, scene.distance);
  std::vector<WorldBox> out;
  out.reserve(scene.model.parts.size());
  for (const Box& b : scene.model.parts) {
    WorldBox w;
    w.center = origin + att * b.center;
    w.half_extents = b.half_extents;
    w.rotation = att * b.orientation.normalized().toRotationMatrix();
    w.albedo = b.albedo;
    out.push_back(w);
  }
  return out;
}

std::optional<RayHit> intersect_box(const WorldBox& box, const Eigen::Vector3d& origin,
                                    const Eigen::Vector3d& dir, double t_min) {
  const Eigen::Vector3d o = box.rotation.transpose() * (origin - box.center);
  const Eigen::Vector3d d = box.rotation.transpose() * dir;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int axis = -1;
  double sign = 0;
  for (int i = 0; i < 3; ++i) {
    const double h = box.half_extents[i];
    if (std::abs(d[i]) < 1e-300) {
      if (std::abs(o[i]) > h) return std::nullopt;
      continue;
    }
    double t1 = (-h - o[i]) / d[i];
    double t2 = (h - o[i]) / d[i];
    double s = -1;  // entering through the -h face
    if (t1 > t2) {
      std::swap(t1, t2);
      s = 1;
    }
    if (t1 > t_near) {
      t_near = t1;
      axis = i;
      sign = s;
    }
    t_far = std::min(t_far, t2);
  }
  if (axis < 0 || t_near > t_far || t_near <= t_min) return std::nullopt;
  RayHit hit;
  hit.t = t_near;
  hit.normal = box.rotation.col(axis) * sign;
  return hit;
}

std::optional<RayHit> intersect(const std::vector<WorldBox>& boxes, const Eigen::Vector3d& origin,
                                const Eigen::Vector3d& dir, double t_min) {
  std::optional<RayHit> best;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    auto h = intersect_box(boxes[i], origin, dir, t_min);
    if (h && (!best || h->t < best->t)) {
      best = h;
      best->part = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace sdc::synth
