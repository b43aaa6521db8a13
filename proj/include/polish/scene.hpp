#pragma once

#include <vector>

#include "polish/env.hpp"
#include "polish/geometry.hpp"

namespace polish {

// Geometry inputs of a run: profile knots, via-point y stations, spacing.
struct SceneConfig {
  std::vector<double> profile_y = {-0.10, 0.00, 0.06, 0.12, 0.17, 0.22, 0.28, 0.34, 0.44};
  std::vector<double> profile_z = {0.020, 0.030, 0.050, 0.058, 0.060, 0.058, 0.050, 0.030, 0.020};
  std::vector<double> via_y = {0.00, 0.06, 0.12, 0.17, 0.22, 0.28, 0.34};
  double lane_x = 0.1;       // the path runs in this x = const plane
  double spacing = 5e-4;     // m
  double x_min = 0.0, x_max = 0.2;
  double contact_stiffness = 5000.0;
  double contact_damping = 50.0;
  double friction = 0.0;
};

struct Scene {
  WorkpieceModel workpiece;
  std::vector<ViaPoint> vias;
  PathModel path;
};

// Via orientation: tool flipped about x (pressing down) plus the surface
// tilt, so the tool axis stays aligned with the local surface normal.
inline Quat surface_aligned_orientation(double slope) {
  return quat_exp(Vec3(kPi + std::atan(slope), 0.0, 0.0));
}

inline Scene build_scene(const SceneConfig& cfg) {
  Scene s;
  s.workpiece.profile = CubicSpline1D(cfg.profile_y, cfg.profile_z);
  s.workpiece.x_min = cfg.x_min;
  s.workpiece.x_max = cfg.x_max;
  s.workpiece.contact_stiffness = cfg.contact_stiffness;
  s.workpiece.contact_damping = cfg.contact_damping;
  s.workpiece.friction = cfg.friction;
  s.workpiece.validate();

  if (cfg.via_y.size() < 2) throw ConfigError("scene needs at least 2 via stations");
  s.vias.reserve(cfg.via_y.size());
  for (double y : cfg.via_y) {
    ViaPoint v;
    const double z = s.workpiece.profile.value(y);
    const double slope = s.workpiece.profile.derivative(y);
    v.position = Vec3(cfg.lane_x, y, z);
    v.direction = Vec3(0.0, 1.0, slope).normalized();
    v.orientation = surface_aligned_orientation(slope);
    s.vias.push_back(v);
  }

  const PositionSpline spline = PositionSpline::from_via_points(s.vias);
  std::vector<Quat> keyframes;
  keyframes.reserve(s.vias.size());
  for (const auto& v : s.vias) keyframes.push_back(v.orientation);
  s.path = discretize_path(spline, keyframes, cfg.spacing);
  return s;
}

}  // namespace polish
