#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "polish/common.hpp"

namespace polish {

// A polishing via-point: position on the workpiece surface, unit path
// direction at that point, and the desired tool orientation.
struct ViaPoint {
  Vec3 position = Vec3::Zero();
  Vec3 direction = Vec3::UnitY();
  Quat orientation = Quat::Identity();
};

inline Vec3 checked_unit(const Vec3& v, const char* what) {
  const double n = v.norm();
  if (n < 1e-12) throw DomainError(std::string(what) + " has zero norm");
  if (std::abs(n - 1.0) > 1e-9) {
    diag::warn(std::string(what) + " renormalized");
    return v / n;
  }
  return v;
}

inline Quat checked_unit(const Quat& q, const char* what) {
  const double n = q.norm();
  if (n < 1e-12) throw DomainError(std::string(what) + " has zero norm");
  if (std::abs(n - 1.0) > 1e-9) {
    diag::warn(std::string(what) + " renormalized");
    Quat r = q;
    r.coeffs() /= n;
    return r;
  }
  return q;
}

// Piecewise cubic Hermite curve through via-point positions. The tangent at
// each via-point is its direction vector scaled by the chord length of the
// segment, so the via directions act as boundary constraints.
class PositionSpline {
 public:
  static PositionSpline from_via_points(const std::vector<ViaPoint>& vias) {
    if (vias.size() < 2)
      throw ConfigError("position spline needs at least 2 via-points");
    PositionSpline s;
    s.points_.reserve(vias.size());
    s.dirs_.reserve(vias.size());
    for (const auto& v : vias) {
      s.points_.push_back(v.position);
      s.dirs_.push_back(checked_unit(v.direction, "via direction"));
    }
    for (std::size_t i = 0; i + 1 < s.points_.size(); ++i) {
      if ((s.points_[i + 1] - s.points_[i]).norm() < 1e-12)
        throw DomainError("degenerate spline segment: duplicate consecutive via positions");
    }
    return s;
  }

  int segments() const { return static_cast<int>(points_.size()) - 1; }

  // Curve parameter u in [0, segments()]; via-point n sits at u = n.
  Vec3 value(double u) const { return eval(u).first; }

  // d(position)/du
  Vec3 derivative(double u) const { return eval(u).second; }

 private:
  std::pair<Vec3, Vec3> eval(double u) const {
    const int nseg = segments();
    u = std::clamp(u, 0.0, static_cast<double>(nseg));
    int i = std::min(static_cast<int>(u), nseg - 1);
    const double s = u - i;
    const Vec3& p0 = points_[i];
    const Vec3& p1 = points_[i + 1];
    const double chord = (p1 - p0).norm();
    const Vec3 m0 = dirs_[i] * chord;
    const Vec3 m1 = dirs_[i + 1] * chord;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    const double g00 = 6 * s2 - 6 * s;
    const double g10 = 3 * s2 - 4 * s + 1;
    const double g01 = -6 * s2 + 6 * s;
    const double g11 = 3 * s2 - 2 * s;
    return {h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1,
            g00 * p0 + g10 * m0 + g01 * p1 + g11 * m1};
  }

  std::vector<Vec3> points_;
  std::vector<Vec3> dirs_;
};

// Constant-angular-velocity interpolation along the shorter arc.
inline Quat slerp(const Quat& q0_in, const Quat& q1_in, double t) {
  Quat q0 = checked_unit(q0_in, "slerp q0");
  Quat q1 = checked_unit(q1_in, "slerp q1");
  double d = q0.dot(q1);
  if (d < -(1.0 - 1e-9))
    throw DomainError("slerp: antipodal quaternions, interpolation arc is ambiguous");
  if (d < 0.0) {
    q1.coeffs() = -q1.coeffs();
    d = -d;
  }
  if (d > 1.0 - 1e-9) {
    // nearly parallel: normalized linear interpolation avoids sin(theta)->0
    Quat r;
    r.coeffs() = (1.0 - t) * q0.coeffs() + t * q1.coeffs();
    r.normalize();
    return r;
  }
  const double theta = std::acos(std::clamp(d, -1.0, 1.0));
  const double st = std::sin(theta);
  Quat r;
  r.coeffs() =
      (std::sin((1.0 - t) * theta) * q0.coeffs() + std::sin(t * theta) * q1.coeffs()) / st;
  r.normalize();
  return r;
}

struct ControlPoint {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 direction = Vec3::UnitY();
};

// Discretized reference path: arc-length-uniform control points. Index order
// is the task direction.
struct PathModel {
  std::vector<ControlPoint> points;
  double spacing = 0.0;  // effective spacing (arc length / (M - 1))

  int size() const { return static_cast<int>(points.size()); }

  int closest_index(const Vec3& x) const {
    int best = 0;
    double best_d2 = (points[0].position - x).squaredNorm();
    for (int i = 1; i < size(); ++i) {
      const double d2 = (points[i].position - x).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
    return best;
  }

  double y_min() const {
    double v = points.front().position.y();
    for (const auto& p : points) v = std::min(v, p.position.y());
    return v;
  }
  double y_max() const {
    double v = points.front().position.y();
    for (const auto& p : points) v = std::max(v, p.position.y());
    return v;
  }
};

// Arc-length table by dense sampling (well above 10x the control-point
// density), inverted by linear interpolation.
inline PathModel discretize_path(const PositionSpline& curve,
                                 const std::vector<Quat>& orientation_keyframes,
                                 double requested_spacing) {
  if (requested_spacing <= 0.0) throw ConfigError("path spacing must be > 0");
  const int nseg = curve.segments();
  if (static_cast<int>(orientation_keyframes.size()) != nseg + 1)
    throw ConfigError("need one orientation keyframe per via-point");

  std::vector<double> us, ss;  // parameter and cumulative arc length
  us.push_back(0.0);
  ss.push_back(0.0);
  Vec3 prev = curve.value(0.0);
  for (int seg = 0; seg < nseg; ++seg) {
    const double chord = (curve.value(seg + 1.0) - curve.value(static_cast<double>(seg))).norm();
    const int n_dense = std::max(64, static_cast<int>(std::ceil(20.0 * chord / requested_spacing)));
    for (int j = 1; j <= n_dense; ++j) {
      const double u = seg + static_cast<double>(j) / n_dense;
      const Vec3 p = curve.value(u);
      us.push_back(u);
      ss.push_back(ss.back() + (p - prev).norm());
      prev = p;
    }
  }
  const double total = ss.back();

  int m = static_cast<int>(std::llround(total / requested_spacing)) + 1;
  if (m < 2) {
    diag::warn("spacing >= arc length; emitting endpoints only");
    m = 2;
  }

  PathModel path;
  path.spacing = total / (m - 1);
  path.points.resize(m);
  std::size_t cursor = 0;
  for (int j = 0; j < m; ++j) {
    const double target = total * j / (m - 1);
    while (cursor + 1 < ss.size() && ss[cursor + 1] < target) ++cursor;
    double u;
    if (cursor + 1 >= ss.size()) {
      u = us.back();
    } else {
      const double span = ss[cursor + 1] - ss[cursor];
      const double f = span > 0.0 ? (target - ss[cursor]) / span : 0.0;
      u = us[cursor] + f * (us[cursor + 1] - us[cursor]);
    }
    auto& cp = path.points[j];
    cp.position = curve.value(u);
    const int seg = std::min(static_cast<int>(u), nseg - 1);
    cp.orientation = slerp(orientation_keyframes[seg], orientation_keyframes[seg + 1], u - seg);
  }
  for (int j = 0; j + 1 < m; ++j) {
    const Vec3 d = path.points[j + 1].position - path.points[j].position;
    const double n = d.norm();
    path.points[j].direction = n > 0.0 ? Vec3(d / n) : Vec3::UnitY();
  }
  path.points[m - 1].direction = path.points[m - 2].direction;  // last reuses previous
  return path;
}

// Natural cubic interpolation spline z = g(y).
class CubicSpline1D {
 public:
  CubicSpline1D() = default;

  CubicSpline1D(std::vector<double> xs, std::vector<double> ys)
      : x_(std::move(xs)), y_(std::move(ys)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw ConfigError("spline needs >= 2 matching knots");
    for (std::size_t i = 0; i + 1 < n; ++i)
      if (x_[i + 1] <= x_[i]) throw ConfigError("spline knots must be strictly increasing");
    m_.assign(n, 0.0);
    if (n == 2) return;
    // Thomas algorithm for the natural-spline tridiagonal system.
    std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), r(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1];
      const double h1 = x_[i + 1] - x_[i];
      a[i] = h0 / 6.0;
      b[i] = (h0 + h1) / 3.0;
      c[i] = h1 / 6.0;
      r[i] = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
    }
    for (std::size_t i = 2; i + 1 < n; ++i) {
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      r[i] -= w * r[i - 1];
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
      m_[i] = (r[i] - c[i] * (i + 2 < n ? m_[i + 1] : 0.0)) / b[i];
      if (i == 1) break;
    }
  }

  double x_min() const { return x_.front(); }
  double x_max() const { return x_.back(); }

  // Evaluates with clamping; sets *clamped when x is outside the domain.
  double value(double x, bool* clamped = nullptr) const {
    const double xc = clamp_domain(x, clamped);
    const std::size_t i = interval(xc);
    const double h = x_[i + 1] - x_[i];
    const double A = (x_[i + 1] - xc) / h;
    const double B = (xc - x_[i]) / h;
    return A * y_[i] + B * y_[i + 1] +
           ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
  }

  double derivative(double x, bool* clamped = nullptr) const {
    const double xc = clamp_domain(x, clamped);
    const std::size_t i = interval(xc);
    const double h = x_[i + 1] - x_[i];
    const double A = (x_[i + 1] - xc) / h;
    const double B = (xc - x_[i]) / h;
    return (y_[i + 1] - y_[i]) / h +
           ((3 * B * B - 1) * m_[i + 1] - (3 * A * A - 1) * m_[i]) * h / 6.0;
  }

 private:
  double clamp_domain(double x, bool* clamped) const {
    if (clamped) *clamped = false;
    if (x < x_.front()) {
      if (clamped) *clamped = true;
      return x_.front();
    }
    if (x > x_.back()) {
      if (clamped) *clamped = true;
      return x_.back();
    }
    return x;
  }

  std::size_t interval(double x) const {
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t i = static_cast<std::size_t>(std::distance(x_.begin(), it));
    if (i > 0) --i;
    return std::min(i, x_.size() - 2);
  }

  std::vector<double> x_, y_, m_;  // m_: second derivatives at knots
};

// Extruded workpiece: height profile z = g(y) swept along x, plus penalty
// contact parameters.
struct WorkpieceModel {
  CubicSpline1D profile;
  double x_min = 0.0, x_max = 0.2;
  double contact_stiffness = 5000.0;  // N/m
  double contact_damping = 50.0;      // N s/m
  double friction = 0.0;

  void validate() const {
    if (contact_stiffness <= 0.0) throw ConfigError("contact stiffness must be > 0");
    if (contact_damping < 0.0) throw ConfigError("contact damping must be >= 0");
    if (friction < 0.0) throw ConfigError("friction must be >= 0");
    if (x_max <= x_min) throw ConfigError("workpiece x-range is empty");
  }
};

struct SurfaceSample {
  double height = 0.0;
  Vec3 normal = Vec3::UnitZ();
};

// Height and outward unit normal at y; out-of-domain y is clamped with a
// warning flag.
inline SurfaceSample surface_query(const WorkpieceModel& w, double y) {
  bool clamped = false;
  SurfaceSample s;
  s.height = w.profile.value(y, &clamped);
  const double slope = w.profile.derivative(y);
  s.normal = Vec3(0.0, -slope, 1.0).normalized();
  if (clamped) diag::warn("surface query outside profile domain; clamped");
  return s;
}

// Position and velocity errors to k lookahead points along the path,
// one row per point: (x_target - x, v_target - v).
inline Eigen::Matrix<double, Eigen::Dynamic, 6> path_features(
    const PathModel& path, const Vec3& position, const Vec3& velocity,
    double target_speed, int k = 5, double lookahead = 0.05) {
  if (path.size() == 0) throw ConfigError("path_features needs a non-empty path");
  const int m = path.closest_index(position);
  const int stride =
      std::max(1, static_cast<int>(std::llround(lookahead / (k * path.spacing))));
  Eigen::Matrix<double, Eigen::Dynamic, 6> out(k, 6);
  for (int i = 1; i <= k; ++i) {
    const int idx = std::min(m + i * stride, path.size() - 1);
    const auto& cp = path.points[idx];
    out.block<1, 3>(i - 1, 0) = (cp.position - position).transpose();
    out.block<1, 3>(i - 1, 3) = (target_speed * cp.direction - velocity).transpose();
  }
  return out;
}

}  // namespace polish
