#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polish/geometry.hpp"
#include "polish/sim.hpp"

namespace polish {

// Shared action format of prior, RL agent, and blend: reference-pose offset
// (position + rotation vector) plus impedance gains.
struct HybridAction {
  Vector6 dpose = Vector6::Zero();  // target minus current
  ImpedanceGains gains;

  Vector13 to_vector() const {
    Vector13 v;
    v.head<6>() = dpose;
    v.segment<6>(6) = gains.stiffness;
    v[12] = gains.damping_factor;
    return v;
  }

  static HybridAction from_vector(const Vector13& v) {
    HybridAction a;
    a.dpose = v.head<6>();
    a.gains.stiffness = v.segment<6>(6);
    a.gains.damping_factor = v[12];
    return a;
  }
};

struct NominalConfig {
  double search_radius = 0.016;  // a_r [m]
  double indent = 0.05;          // reference shift along the inward normal [m]
  ImpedanceGains gains;

  void validate() const {
    if (search_radius <= 0.0) throw ConfigError("search radius must be > 0");
    if (indent < 0.0) throw ConfigError("indentation must be >= 0");
    gains.validate();
  }
};

inline ImpedanceGains make_gains(double kx, double ky, double kz, double kpx,
                                 double kpy, double kpz, double zeta) {
  ImpedanceGains g;
  g.stiffness << kx, ky, kz, kpx, kpy, kpz;
  g.damping_factor = zeta;
  return g;
}

// Fixed-gain presets for the nominal controller.
inline ImpedanceGains gain_preset(std::string_view name) {
  if (name == "untuned") return make_gains(500, 160, 50, 500, 500, 500, 1.0);
  if (name == "tuned") return make_gains(500, 107, 68, 500, 500, 500, 0.9562);
  if (name == "hardware-untuned") return make_gains(800, 1085, 900, 150, 80, 25, 1.0);
  throw ConfigError("unknown gain preset: " + std::string(name));
}

// Section-wise gain table switching on the tool's current y (closed-left
// intervals). k_x and rotational gains stay at the base values.
struct GainProfile {
  struct Row {
    double y_lo = 0.0, y_hi = 0.0;
    double k_y = 0.0, k_z = 0.0, zeta = 1.0;
  };
  std::vector<Row> rows;
  ImpedanceGains base;

  void validate() const {
    if (rows.empty()) throw ConfigError("gain profile has no sections");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].y_hi <= rows[i].y_lo) throw ConfigError("gain profile row has empty span");
      if (i > 0 && std::abs(rows[i].y_lo - rows[i - 1].y_hi) > 1e-12)
        throw ConfigError("gain profile sections must partition the y-range");
    }
  }

  ImpedanceGains gains_at(double y) const {
    const Row* hit = &rows.back();
    for (const auto& r : rows) {
      if (y >= r.y_lo && y < r.y_hi) {
        hit = &r;
        break;
      }
    }
    if (y < rows.front().y_lo) hit = &rows.front();
    ImpedanceGains g = base;
    g.stiffness[1] = hit->k_y;
    g.stiffness[2] = hit->k_z;
    g.damping_factor = hit->zeta;
    return g;
  }
};

// Index of the farthest control point along the task direction within the
// search radius; globally nearest point when none is in radius.
inline int select_control_point(const PathModel& path, const Vec3& position,
                                double radius) {
  if (path.size() == 0) throw ConfigError("select_control_point needs a non-empty path");
  const double r2 = radius * radius;
  int best = -1;
  for (int i = 0; i < path.size(); ++i)
    if ((path.points[i].position - position).squaredNorm() <= r2) best = i;
  if (best < 0) best = path.closest_index(position);
  return best;
}

// Control prior: pick the reference control point, indent it along the
// inward surface normal, and emit the offset with fixed gains.
inline HybridAction nominal_action(const PathModel& path, const WorkpieceModel& workpiece,
                                   const Pose& pose, const NominalConfig& config,
                                   const GainProfile* profile = nullptr) {
  const int idx = select_control_point(path, pose.position, config.search_radius);
  const ControlPoint& cp = path.points[idx];
  const double slope = workpiece.profile.derivative(cp.position.y());
  const Vec3 normal = Vec3(0.0, -slope, 1.0).normalized();
  const Vec3 x_ref = cp.position - config.indent * normal;

  HybridAction a;
  a.dpose.head<3>() = x_ref - pose.position;
  a.dpose.tail<3>() = quat_rotvec(cp.orientation * pose.orientation.inverse());
  a.gains = profile ? profile->gains_at(pose.position.y()) : config.gains;
  return a;
}

}  // namespace polish
