#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <optional>
#include <vector>

#include "sdc/common.hpp"

namespace sdc::synth {

/// Oriented box in the satellite body frame.
struct Box {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extents = Eigen::Vector3d::Ones();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  double albedo = 0.8;
};

/// Sampling ranges for procedural satellites and observation conditions.
struct SceneConfig {
  double distance_min = 50.0, distance_max = 250.0;         // m
  double body_half_min = 0.5, body_half_max = 1.5;          // m (body 1-3 m)
  double panel_span_min = 3.0, panel_span_max = 8.0;        // m, long side
  double panel_width_min = 1.0, panel_width_max = 2.5;      // m
  double panel_thickness = 0.06;                            // m
  double sun_max_angle_deg = 70.0;
  double antenna_probability = 0.5;
  double body_albedo_min = 0.55, body_albedo_max = 0.9;
  double panel_albedo_min = 0.3, panel_albedo_max = 0.6;

  void validate() const;
};

/// Procedural satellite geometry; part 0 is the body, then 1-2 solar
/// panels, then an optional antenna mast (thin box).
struct SatelliteModel {
  int model_id = 0;
  Eigen::Vector3d body_half_extents = Eigen::Vector3d::Ones();
  std::vector<double> panel_spans;
  bool has_antenna = false;
  std::vector<Box> parts;
};

struct SceneSpec {
  SatelliteModel model;
  Eigen::Quaterniond attitude = Eigen::Quaterniond::Identity();
  double distance = 100.0;                                    // m along boresight
  Eigen::Vector3d sun_direction = Eigen::Vector3d(0, 0, -1);  // unit, towards the sun

  int model_id() const { return model.model_id; }
  /// Angle between the sun direction and the direction back to the camera.
  double sun_angle_deg() const;
  /// Checks the scene invariants against `cfg` ranges.
  void validate(const SceneConfig& cfg = {}) const;
};

/// Box posed in the camera frame.
struct WorldBox {
  Eigen::Vector3d center;
  Eigen::Vector3d half_extents;
  Eigen::Matrix3d rotation;  // columns are the box axes in camera frame
  double albedo = 0.8;
};

struct RayHit {
  double t = 0;  // ray parameter; equals z-depth for rays with unit z
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
  int part = -1;
};

SatelliteModel sample_model(Rng& rng, const SceneConfig& cfg, int model_id);
/// Pose, distance and illumination for a given satellite.
SceneSpec sample_view(Rng& rng, const SceneConfig& cfg, SatelliteModel model);
/// Geometry and observation conditions drawn from one generator.
SceneSpec sample_scene(Rng& rng, const SceneConfig& cfg, int model_id = 0);

std::vector<WorldBox> pose_scene(const SceneSpec& scene);

/// Nearest intersection with t > t_min over all boxes.
std::optional<RayHit> intersect(const std::vector<WorldBox>& boxes, const Eigen::Vector3d& origin,
                                const Eigen::Vector3d& dir, double t_min = 0.0);

/// Single box; returns the entry parameter and face normal.
std::optional<RayHit> intersect_box(const WorldBox& box, const Eigen::Vector3d& origin,
                                    const Eigen::Vector3d& dir, double t_min = 0.0);

}  // namespace sdc::synth
