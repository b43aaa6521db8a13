#pragma once

#include <cmath>
#include <optional>

#include "polish/common.hpp"
#include "polish/geometry.hpp"
#include "polish/rng.hpp"

namespace polish {

struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
};

struct ToolState {
  Pose pose;
  Vector6 twist = Vector6::Zero();  // linear m/s, angular rad/s (world frame)
  double time = 0.0;
};

struct ImpedanceGains {
  Vector6 stiffness = Vector6::Zero();  // k_x k_y k_z [N/m], k_phi_* [N m/rad]
  double damping_factor = 1.0;          // zeta; D = 2 zeta sqrt(K)

  void validate() const {
    for (int i = 0; i < 6; ++i)
      if (stiffness[i] < 0.0) throw ConfigError("stiffness entries must be >= 0");
    if (damping_factor < 0.0) throw ConfigError("damping factor must be >= 0");
  }
};

struct ToolParams {
  double mass = 1.0;      // kg
  double inertia = 0.01;  // kg m^2, scalar and decoupled
};

// Rotation vector of q, shortest representation (norm <= pi).
inline Vec3 quat_rotvec(const Quat& q_in) {
  Quat q = q_in;
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 v = q.vec();
  const double vn = v.norm();
  if (vn < 1e-12) return 2.0 * v;  // small-angle limit, w ~ 1
  const double angle = 2.0 * std::atan2(vn, q.w());
  return v * (angle / vn);
}

inline Quat quat_exp(const Vec3& rotvec) {
  const double theta = rotvec.norm();
  if (theta < 1e-12) {
    Quat q(1.0, 0.5 * rotvec.x(), 0.5 * rotvec.y(), 0.5 * rotvec.z());
    q.normalize();
    return q;
  }
  const double half = 0.5 * theta;
  const Vec3 axis = rotvec / theta;
  const double s = std::sin(half);
  return Quat(std::cos(half), s * axis.x(), s * axis.y(), s * axis.z());
}

// (delta position, delta orientation as rotation vector of q_ref * q^-1).
inline Vector6 pose_error(const Pose& reference, const Pose& current) {
  Vector6 e;
  e.head<3>() = reference.position - current.position;
  e.tail<3>() = quat_rotvec(reference.orientation * current.orientation.inverse());
  return e;
}

// Task-space wrench K dp - D twist with D = 2 zeta sqrt(K) per entry
// (reference twist is zero).
inline Vector6 impedance_wrench(const ImpedanceGains& gains, const Vector6& dp,
                                const Vector6& twist) {
  Vector6 w;
  for (int i = 0; i < 6; ++i) {
    const double k = gains.stiffness[i];
    const double d = 2.0 * gains.damping_factor * std::sqrt(k);
    w[i] = k * dp[i] - d * twist[i];
  }
  return w;
}

struct ContactResult {
  Vec3 force = Vec3::Zero();
  double penetration = 0.0;
};

// Penalty contact against the extruded profile. Penetration is the signed
// normal distance below the surface; force is clamped so contact never pulls.
inline ContactResult contact_force(const WorkpieceModel& w, const Vec3& tip_position,
                                   const Vec3& tip_velocity) {
  ContactResult out;
  if (tip_position.x() < w.x_min || tip_position.x() > w.x_max) return out;
  bool clamped = false;
  const double z_surf = w.profile.value(tip_position.y(), &clamped);
  const double slope = w.profile.derivative(tip_position.y());
  const Vec3 n = Vec3(0.0, -slope, 1.0).normalized();
  // signed normal distance of the tip above the surface point (x, y, g(y))
  const double gap = (tip_position.z() - z_surf) * n.z();
  const double delta = std::max(0.0, -gap);
  if (delta <= 0.0) return out;
  out.penetration = delta;
  const double fn = std::max(
      0.0, w.contact_stiffness * delta - w.contact_damping * tip_velocity.dot(n));
  out.force = fn * n;
  if (w.friction > 0.0 && fn > 0.0) {
    const Vec3 v_tan = tip_velocity - tip_velocity.dot(n) * n;
    const double vt = v_tan.norm();
    if (vt > 1e-9) out.force -= w.friction * fn * (v_tan / vt);
  }
  return out;
}

struct StepResult {
  ToolState state;
  Vec3 contact = Vec3::Zero();
  double penetration = 0.0;
};

// One physics substep. Semi-implicit Euler with the impedance damping term
// handled implicitly: at tool-scale inertias the rotational damping
// 2 zeta sqrt(k_phi) / I exceeds 2/dt, which an explicit update cannot
// integrate stably.
inline StepResult step_dynamics(const ToolState& state, const ImpedanceGains& gains,
                                const Pose& reference, const WorkpieceModel& workpiece,
                                const ToolParams& tool, double dt) {
  if (dt <= 0.0) throw ConfigError("dt must be > 0");
  const Vector6 dp = pose_error(reference, state.pose);
  const ContactResult contact =
      contact_force(workpiece, state.pose.position, state.twist.head<3>());

  StepResult out;
  out.contact = contact.force;
  out.penetration = contact.penetration;
  ToolState& next = out.state;
  next = state;

  for (int i = 0; i < 6; ++i) {
    const double k = gains.stiffness[i];
    const double d = 2.0 * gains.damping_factor * std::sqrt(k);
    const double inertia = i < 3 ? tool.mass : tool.inertia;
    double f = k * dp[i];
    if (i < 3) f += contact.force[i];
    next.twist[i] = (state.twist[i] + dt * f / inertia) / (1.0 + dt * d / inertia);
  }
  next.pose.position += dt * next.twist.head<3>();
  next.pose.orientation = quat_exp(dt * next.twist.tail<3>()) * state.pose.orientation;
  next.pose.orientation.normalize();
  next.time += dt;

  if (!next.twist.allFinite() || !next.pose.position.allFinite() ||
      !next.pose.orientation.coeffs().allFinite())
    throw DivergedError("tool state became non-finite");
  return out;
}

// White measurement noise followed by a first-order low-pass, run at the
// physics rate.
class ForceSensor {
 public:
  ForceSensor() = default;
  ForceSensor(double noise_sigma, double cutoff_hz, Rng rng)
      : noise_sigma_(noise_sigma), cutoff_hz_(cutoff_hz), rng_(rng) {
    if (cutoff_hz <= 0.0) throw ConfigError("sensor cutoff must be > 0");
  }

  Vec3 sense(const Vec3& true_force, double dt) {
    const double tau = 1.0 / (2.0 * kPi * cutoff_hz_);
    const double alpha = dt / (dt + tau);
    Vec3 u = true_force;
    if (noise_sigma_ > 0.0)
      u += Vec3(rng_.normal(0.0, noise_sigma_), rng_.normal(0.0, noise_sigma_),
                rng_.normal(0.0, noise_sigma_));
    state_ += alpha * (u - state_);
    return state_;
  }

  const Vec3& value() const { return state_; }
  void reset(Rng rng) {
    state_.setZero();
    rng_ = rng;
  }
  void set_state(const Vec3& s) { state_ = s; }
  Rng& rng() { return rng_; }

  double noise_sigma() const { return noise_sigma_; }
  double cutoff_hz() const { return cutoff_hz_; }

 private:
  double noise_sigma_ = 0.0;
  double cutoff_hz_ = 35.0;
  Vec3 state_ = Vec3::Zero();
  Rng rng_;
};

// dh/dt = c * F_N * v_T
inline double material_removal_rate(double normal_force, double tangential_speed,
                                    double c) {
  return c * normal_force * tangential_speed;
}

}  // namespace polish
