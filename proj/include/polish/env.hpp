#pragma once

#include <array>
#include <optional>
#include <vector>

#include "polish/geometry.hpp"
#include "polish/nominal.hpp"
#include "polish/rng.hpp"
#include "polish/sim.hpp"

namespace polish {

// Purely linear error-to-reward mapping on [0, e_max].
inline double transform_linear(double e, double e_max) {
  if (e < 0.0) throw DomainError("transform_linear: error must be >= 0");
  if (e_max <= 0.0) throw ConfigError("transform_linear: e_max must be > 0");
  if (e > e_max) return 0.0;
  return 1.0 - e / e_max;
}

// Linear near the target, quadratic beyond e_mid, zero beyond e_max.
inline double transform_linquad(double e, double e_mid, double e_max) {
  if (e < 0.0) throw DomainError("transform_linquad: error must be >= 0");
  if (!(0.0 < e_mid && e_mid < e_max))
    throw ConfigError("transform_linquad: need 0 < e_mid < e_max");
  if (e <= e_mid) return 1.0 - e / (2.0 * e_mid);
  if (e <= e_max)
    return (e_max * e_max - e * e) / (2.0 * (e_max * e_max - e_mid * e_mid));
  return 0.0;
}

struct RewardWeights {
  double trunc = -1.0;
  double term = 0.1;
  double c_perp = 0.1;
  double c_par = 0.05;
  double v = 0.3;
  double d = 0.15;
  double f = 0.4;
};

struct RewardBounds {
  double c_perp_max = 0.01;  // m
  double c_par_max = 0.01;   // m
  double v_max = 0.01;       // m/s
  double d_max = 0.6;        // rad
  double f_max = 2.0;        // N
  double f_mid = 0.5;        // N
};

struct SafetyLimits {
  double x_lo = 0.05, x_hi = 0.15;
  double y_lo = -0.23, y_hi = 0.57;
  double z_lo = 0.0, z_hi = 0.2;
  double phi_x_min = 110.0 * kPi / 180.0;  // |phi_x| must be >= this
  double phi_yz_max = 10.0 * kPi / 180.0;
  double speed_max = 0.5;       // m/s
  double force_max = 25.0;      // N
  double table_z = 0.01;        // contact below this z means table contact
};

struct EnvConfig {
  double force_target = 5.0;    // N
  double speed_target = 0.05;   // m/s
  int horizon = 380;
  double control_hz = 50.0;
  double physics_dt = 1e-3;
  RewardWeights weights;
  RewardBounds bounds;
  SafetyLimits safety;
  double wipe_tolerance = 0.01;      // m
  double wipe_force_threshold = 0.5;  // N (filtered)
  double reset_lift = 0.005;          // m along the surface normal
  double reset_jitter = 0.002;        // m, uniform per axis
  double mrr_coefficient = 1.0;
  bool truncate_on_violation = true;
  ToolParams tool;
  double sensor_noise_sigma = 0.1;  // N
  double sensor_cutoff_hz = 35.0;
  int path_feature_k = 5;
  double path_feature_lookahead = 0.05;  // m

  int substeps() const {
    return std::max(1, static_cast<int>(std::llround(1.0 / (control_hz * physics_dt))));
  }

  void validate() const {
    const double csum =
        weights.c_perp + weights.c_par + weights.v + weights.d + weights.f;
    if (std::abs(csum - 1.0) > 1e-9)
      throw ConfigError("tracking reward weights must sum to 1");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (!(bounds.c_perp_max > 0 && bounds.c_par_max > 0 && bounds.v_max > 0 &&
          bounds.d_max > 0 && bounds.f_max > 0 && bounds.f_mid > 0))
      throw ConfigError("reward bounds must be positive");
    if (bounds.f_mid >= bounds.f_max) throw ConfigError("need f_mid < f_max");
    if (wipe_tolerance <= 0 || wipe_force_threshold <= 0)
      throw ConfigError("wipe parameters must be positive");
    if (control_hz <= 0 || physics_dt <= 0) throw ConfigError("rates must be positive");
  }
};

enum class Violation { position, orientation, velocity, force, table_contact };

inline const char* violation_name(Violation v) {
  switch (v) {
    case Violation::position: return "position";
    case Violation::orientation: return "orientation";
    case Violation::velocity: return "velocity";
    case Violation::force: return "force";
    case Violation::table_contact: return "table_contact";
  }
  return "?";
}

// Everything the reward and safety checks need about the instantaneous
// simulator state.
struct SimSnapshot {
  Pose pose;
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 filtered_force = Vec3::Zero();
  Vec3 true_contact_force = Vec3::Zero();
  double penetration = 0.0;
};

// Roll-pitch-yaw of R = Rz(c) Ry(b) Rx(a); returns (a, b, c).
inline Vec3 euler_rpy(const Quat& q) {
  const Eigen::Matrix3d r = q.toRotationMatrix();
  const double a = std::atan2(r(2, 1), r(2, 2));
  const double b = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double c = std::atan2(r(1, 0), r(0, 0));
  return Vec3(a, b, c);
}

// Fixed priority order: position, orientation, velocity, force, table.
inline std::optional<Violation> check_safety(const SimSnapshot& s,
                                             const SafetyLimits& lim) {
  const Vec3& x = s.pose.position;
  if (x.x() < lim.x_lo || x.x() > lim.x_hi || x.y() < lim.y_lo || x.y() > lim.y_hi ||
      x.z() < lim.z_lo || x.z() > lim.z_hi)
    return Violation::position;
  const Vec3 rpy = euler_rpy(s.pose.orientation);
  if (std::abs(rpy.x()) < lim.phi_x_min || std::abs(rpy.y()) > lim.phi_yz_max ||
      std::abs(rpy.z()) > lim.phi_yz_max)
    return Violation::orientation;
  if (s.linear_velocity.norm() >= lim.speed_max) return Violation::velocity;
  if (s.filtered_force.norm() >= lim.force_max) return Violation::force;
  if (s.true_contact_force.norm() > 0.0 && x.z() < lim.table_z)
    return Violation::table_contact;
  return std::nullopt;
}

struct RewardBreakdown {
  double c_perp = 0.0, c_par = 0.0, v = 0.0, d = 0.0, f = 0.0;
  double trunc = 0.0, term = 0.0;

  double total() const { return c_perp + c_par + v + d + f + trunc + term; }
};

// Weighted tracking terms of the per-step reward (truncation/termination
// bonuses are added by the episode logic).
inline RewardBreakdown reward_terms(const SimSnapshot& s, const PathModel& path,
                                    const EnvConfig& cfg) {
  const int m = path.closest_index(s.pose.position);
  const ControlPoint& cp = path.points[m];
  const Vec3 dx = s.pose.position - cp.position;

  const double e_par = std::abs(dx.x());  // x is the lateral deviation here
  const double e_perp = std::sqrt(dx.y() * dx.y() + dx.z() * dx.z());
  const double speed = s.linear_velocity.norm();
  const double e_v = std::abs(speed - cfg.speed_target);
  double e_d = cfg.bounds.d_max;  // at rest the direction is undefined
  if (speed > 1e-9) {
    const double c = std::clamp((s.linear_velocity / speed).dot(cp.direction), -1.0, 1.0);
    e_d = std::acos(c);
  }
  const double e_f = std::abs(s.filtered_force.norm() - cfg.force_target);

  RewardBreakdown r;
  r.c_perp = cfg.weights.c_perp * transform_linear(e_perp, cfg.bounds.c_perp_max);
  r.c_par = cfg.weights.c_par * transform_linear(e_par, cfg.bounds.c_par_max);
  r.v = cfg.weights.v * transform_linear(e_v, cfg.bounds.v_max);
  r.d = cfg.weights.d * transform_linear(e_d, cfg.bounds.d_max);
  r.f = cfg.weights.f * transform_linquad(e_f, cfg.bounds.f_mid, cfg.bounds.f_max);
  return r;
}

struct StepInfo {
  RewardBreakdown terms;
  int wipes = 0;
  double mrr = 0.0;
  double tangential_speed = 0.0;
  double sensed_force = 0.0;
  double penetration = 0.0;
};

struct StepOutcome {
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  std::optional<Violation> violation;  // set iff truncated by safety
  StepInfo info;
  VectorXd observation;
};

// Episodic wrapper around the simulator: observation assembly, reward,
// safety truncation, wipe tracking, and failure accounting.
class PolishEnv {
 public:
  static constexpr int kObservationDim = 47;

  PolishEnv(PathModel path, WorkpieceModel workpiece, std::vector<ViaPoint> vias,
            EnvConfig config)
      : path_(std::move(path)),
        workpiece_(std::move(workpiece)),
        vias_(std::move(vias)),
        cfg_(config) {
    cfg_.validate();
    workpiece_.validate();
    if (vias_.empty()) throw ConfigError("env needs via-points for wipe tracking");
    wiped_.assign(vias_.size(), false);
  }

  VectorXd reset(std::uint64_t seed) {
    rng_ = Rng(seed);
    const ViaPoint& v0 = vias_.front();
    const SurfaceSample surf = surface_query(workpiece_, v0.position.y());
    state_ = ToolState{};
    state_.pose.position = v0.position + cfg_.reset_lift * surf.normal;
    for (int i = 0; i < 3; ++i)
      state_.pose.position[i] += rng_.uniform(-cfg_.reset_jitter, cfg_.reset_jitter);
    state_.pose.orientation = v0.orientation;
    sensor_ = ForceSensor(cfg_.sensor_noise_sigma, cfg_.sensor_cutoff_hz,
                          rng_.spawn("force-sensor"));
    std::fill(wiped_.begin(), wiped_.end(), false);
    steps_ = 0;
    done_ = false;
    first_violation_.reset();
    violation_steps_ = 0;
    last_contact_ = ContactResult{};
    episode_y_min_ = episode_y_max_ = state_.pose.position.y();
    return observation(0.0);
  }

  // Applies the blended action for one control period. lambda_for_obs is
  // written into the returned observation's weight slot.
  StepOutcome step(const HybridAction& action, double lambda_for_obs) {
    if (done_) throw UsageError("env_step called on a finished episode");

    Pose reference;
    reference.position = state_.pose.position + action.dpose.head<3>();
    reference.orientation =
        (quat_exp(action.dpose.tail<3>()) * state_.pose.orientation).normalized();

    Vec3 true_force = Vec3::Zero();
    double penetration = 0.0;
    const int n = cfg_.substeps();
    for (int i = 0; i < n; ++i) {
      StepResult r = step_dynamics(state_, action.gains, reference, workpiece_,
                                   cfg_.tool, cfg_.physics_dt);
      state_ = r.state;
      true_force = r.contact;
      penetration = r.penetration;
      sensor_.sense(r.contact, cfg_.physics_dt);
    }
    last_contact_ = ContactResult{true_force, penetration};
    ++steps_;

    SimSnapshot snap;
    snap.pose = state_.pose;
    snap.linear_velocity = state_.twist.head<3>();
    snap.filtered_force = sensor_.value();
    snap.true_contact_force = true_force;
    snap.penetration = penetration;

    episode_y_min_ = std::min(episode_y_min_, snap.pose.position.y());
    episode_y_max_ = std::max(episode_y_max_, snap.pose.position.y());

    // wipe tracking: close to a via-point while pressing on the surface
    if (snap.filtered_force.norm() > cfg_.wipe_force_threshold) {
      for (std::size_t i = 0; i < vias_.size(); ++i) {
        if (!wiped_[i] &&
            (vias_[i].position - snap.pose.position).norm() <= cfg_.wipe_tolerance)
          wiped_[i] = true;
      }
    }

    StepOutcome out;
    out.info.terms = reward_terms(snap, path_, cfg_);
    out.info.wipes = wipe_count();
    out.info.sensed_force = snap.filtered_force.norm();
    out.info.penetration = penetration;
    const int m = path_.closest_index(snap.pose.position);
    out.info.tangential_speed =
        std::abs(snap.linear_velocity.dot(path_.points[m].direction));
    out.info.mrr = material_removal_rate(out.info.sensed_force,
                                         out.info.tangential_speed,
                                         cfg_.mrr_coefficient);

    const std::optional<Violation> violation = check_safety(snap, cfg_.safety);
    if (violation) {
      ++violation_steps_;
      if (!first_violation_) first_violation_ = violation;
    }

    if (violation && cfg_.truncate_on_violation) {
      out.truncated = true;
      out.violation = violation;
      out.info.terms.trunc = cfg_.weights.trunc;
    } else if (wipe_count() == static_cast<int>(vias_.size())) {
      out.terminated = true;
      out.info.terms.term = cfg_.weights.term;
    } else if (steps_ >= cfg_.horizon) {
      out.truncated = true;  // horizon: no penalty
    }
    out.reward = out.info.terms.total();
    done_ = out.terminated || out.truncated;
    out.observation = observation(lambda_for_obs);
    return out;
  }

  VectorXd observation(double lambda) const {
    VectorXd obs(kObservationDim);
    obs.segment<3>(0) = state_.pose.position;
    const Quat& q = state_.pose.orientation;
    obs[3] = q.w();
    obs[4] = q.x();
    obs[5] = q.y();
    obs[6] = q.z();
    obs.segment<6>(7) = state_.twist;
    obs.segment<3>(13) = sensor_.value();
    const auto feats =
        path_features(path_, state_.pose.position, state_.twist.head<3>(),
                      cfg_.speed_target, cfg_.path_feature_k, cfg_.path_feature_lookahead);
    for (int i = 0; i < cfg_.path_feature_k; ++i)
      obs.segment<6>(16 + 6 * i) = feats.row(i).transpose();
    obs[46] = lambda;
    return obs;
  }

  const ToolState& tool_state() const { return state_; }
  const PathModel& path() const { return path_; }
  const WorkpieceModel& workpiece() const { return workpiece_; }
  const std::vector<ViaPoint>& vias() const { return vias_; }
  const EnvConfig& config() const { return cfg_; }
  EnvConfig& mutable_config() { return cfg_; }
  const ForceSensor& sensor() const { return sensor_; }

  bool done() const { return done_; }
  int steps() const { return steps_; }
  int wipe_count() const {
    int n = 0;
    for (bool w : wiped_) n += w ? 1 : 0;
    return n;
  }
  const std::vector<bool>& wiped() const { return wiped_; }
  std::optional<Violation> first_violation() const { return first_violation_; }
  long violation_steps() const { return violation_steps_; }
  const ContactResult& last_contact() const { return last_contact_; }
  double episode_y_min() const { return episode_y_min_; }
  double episode_y_max() const { return episode_y_max_; }

  // fraction of the path's y extent visited this episode
  double y_coverage() const {
    const double extent = path_.y_max() - path_.y_min();
    if (extent <= 0.0) return 0.0;
    const double lo = std::max(episode_y_min_, path_.y_min());
    const double hi = std::min(episode_y_max_, path_.y_max());
    return std::clamp((hi - lo) / extent, 0.0, 1.0);
  }

 private:
  PathModel path_;
  WorkpieceModel workpiece_;
  std::vector<ViaPoint> vias_;
  EnvConfig cfg_;
  ToolState state_;
  ForceSensor sensor_;
  Rng rng_;
  std::vector<bool> wiped_;
  int steps_ = 0;
  bool done_ = true;
  std::optional<Violation> first_violation_;
  long violation_steps_ = 0;
  ContactResult last_contact_;
  double episode_y_min_ = 0.0, episode_y_max_ = 0.0;
};

}  // namespace polish
