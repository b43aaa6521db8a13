#include <catch2/catch_amalgamated.hpp>

#include "polish/geometry.hpp"
#include "polish/rng.hpp"
#include "polish/scene.hpp"

using namespace polish;

namespace {

std::vector<ViaPoint> straight_vias(double length) {
  ViaPoint a, b;
  a.position = Vec3(0.1, 0.0, 0.05);
  a.direction = Vec3::UnitY();
  b.position = a.position + length * Vec3::UnitY();
  b.direction = Vec3::UnitY();
  return {a, b};
}

Quat axis_angle(const Vec3& axis, double angle) {
  return Quat(Eigen::AngleAxisd(angle, axis.normalized()));
}

}  // namespace

TEST_CASE("spline through collinear via-points is the straight segment", "[geometry]") {
  const auto vias = straight_vias(0.1);
  const auto spline = PositionSpline::from_via_points(vias);
  for (int i = 0; i <= 1000; ++i) {
    const double u = i / 1000.0;
    const Vec3 expect = vias[0].position + u * 0.1 * Vec3::UnitY();
    REQUIRE((spline.value(u) - expect).norm() < 1e-9);
  }
}

TEST_CASE("spline interpolates every via-point and matches directions", "[geometry]") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.uniform_int(3, 8);
    std::vector<ViaPoint> vias(n);
    Vec3 pos(0, 0, 0);
    for (int i = 0; i < n; ++i) {
      pos += Vec3(rng.uniform(0.01, 0.1), rng.uniform(0.01, 0.1), rng.uniform(-0.05, 0.05));
      vias[i].position = pos;
      vias[i].direction =
          Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    }
    const auto spline = PositionSpline::from_via_points(vias);
    for (int i = 0; i < n; ++i) {
      // interpolation constraint
      REQUIRE((spline.value(static_cast<double>(i)) - vias[i].position).norm() < 1e-9);
      // finite-difference tangent parallel to the via direction
      const double h = 1e-6;
      const Vec3 fd = (spline.value(i + h) - spline.value(i - h)) / (2 * h);
      const double cosang =
          std::clamp(fd.normalized().dot(vias[i].direction), -1.0, 1.0);
      REQUIRE(std::acos(cosang) < 1e-4);
    }
  }
}

TEST_CASE("spline rejects degenerate input", "[geometry]") {
  REQUIRE_THROWS_AS(PositionSpline::from_via_points({ViaPoint{}}), ConfigError);
  ViaPoint a, b;
  a.position = b.position = Vec3(0.1, 0.2, 0.3);
  REQUIRE_THROWS_AS(PositionSpline::from_via_points({a, b}), DomainError);
}

TEST_CASE("slerp endpoints and midpoint", "[geometry]") {
  const Quat q0 = Quat::Identity();
  const Quat q1 = axis_angle(Vec3::UnitZ(), kPi / 2);
  REQUIRE(slerp(q0, q1, 0.0).angularDistance(q0) < 1e-12);
  REQUIRE(slerp(q0, q1, 1.0).angularDistance(q1) < 1e-12);
  const Quat mid = slerp(q0, q1, 0.5);
  const Quat expect = axis_angle(Vec3::UnitZ(), kPi / 4);
  for (int i = 0; i < 4; ++i)
    REQUIRE(std::abs(mid.coeffs()[i] - expect.coeffs()[i]) < 1e-9);
}

TEST_CASE("slerp handles nearly-parallel and flags non-unit input", "[geometry]") {
  const Quat q0 = Quat::Identity();
  const Quat q1 = axis_angle(Vec3::UnitZ(), 1e-12);
  const Quat r = slerp(q0, q1, 0.3);
  REQUIRE(std::isfinite(r.w()));
  REQUIRE(std::abs(r.norm() - 1.0) < 1e-9);

  diag::reset_warnings();
  Quat off = q0;
  off.coeffs() *= 1.5;
  const Quat rn = slerp(off, axis_angle(Vec3::UnitX(), 0.7), 0.5);
  REQUIRE(diag::warning_count() > 0);
  REQUIRE(std::abs(rn.norm() - 1.0) < 1e-9);
}

TEST_CASE("slerp rejects antipodal pairs", "[geometry]") {
  const Quat q0 = axis_angle(Vec3::UnitX(), 0.4);
  Quat q1 = q0;
  q1.coeffs() = -q1.coeffs();
  REQUIRE_THROWS_AS(slerp(q0, q1, 0.5), DomainError);
}

TEST_CASE("slerp norm preservation and angle linearity", "[geometry]") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    Quat q0(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    Quat q1(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q0.normalize();
    q1.normalize();
    if (std::abs(q0.dot(q1)) > 1.0 - 1e-6) continue;  // skip ambiguous pairs
    const double t = rng.uniform();
    const Quat qt = slerp(q0, q1, t);
    REQUIRE(std::abs(qt.norm() - 1.0) < 1e-9);
    const double full = q0.angularDistance(q1);
    const double part = q0.angularDistance(qt);
    REQUIRE(std::abs(part - t * full) < 1e-6);
  }
}

TEST_CASE("discretization of a straight 0.1 m path at 5e-4 spacing", "[geometry]") {
  const auto vias = straight_vias(0.1);
  const auto spline = PositionSpline::from_via_points(vias);
  const auto path = discretize_path(spline, {Quat::Identity(), Quat::Identity()}, 5e-4);
  REQUIRE(path.size() == 201);
  for (int i = 0; i + 1 < path.size(); ++i)
    REQUIRE((path.points[i].direction - Vec3::UnitY()).norm() < 1e-9);
  REQUIRE((path.points.back().direction - Vec3::UnitY()).norm() < 1e-9);
}

TEST_CASE("discretization is arc-length uniform on the bridge", "[geometry]") {
  const Scene scene = build_scene(SceneConfig{});
  const auto& path = scene.path;
  double gmin = 1e9, gmax = 0.0;
  for (int i = 0; i + 1 < path.size(); ++i) {
    const double g = (path.points[i + 1].position - path.points[i].position).norm();
    gmin = std::min(gmin, g);
    gmax = std::max(gmax, g);
    REQUIRE(std::abs(g - 5e-4) < 0.01 * 5e-4);
  }
  REQUIRE(gmax / gmin < 1.02);
}

TEST_CASE("discretization with spacing >= arc length emits endpoints", "[geometry]") {
  const auto vias = straight_vias(0.1);
  const auto spline = PositionSpline::from_via_points(vias);
  diag::reset_warnings();
  const auto path = discretize_path(spline, {Quat::Identity(), Quat::Identity()}, 1.0);
  REQUIRE(path.size() == 2);
  REQUIRE(diag::warning_count() > 0);
  REQUIRE((path.points.front().position - vias.front().position).norm() < 1e-12);
  REQUIRE((path.points.back().position - vias.back().position).norm() < 1e-9);
}

TEST_CASE("surface query on flat and curved profiles", "[geometry]") {
  WorkpieceModel flat;
  flat.profile = CubicSpline1D({-1.0, 1.0}, {0.05, 0.05});
  auto s = surface_query(flat, 0.3);
  REQUIRE(s.height == Catch::Approx(0.05).margin(1e-15));
  REQUIRE((s.normal - Vec3::UnitZ()).norm() < 1e-12);

  // symmetric bump: apex normal is straight up
  WorkpieceModel bump;
  bump.profile = CubicSpline1D({-0.2, -0.1, 0.0, 0.1, 0.2},
                               {0.0, 0.03, 0.05, 0.03, 0.0});
  s = surface_query(bump, 0.0);
  REQUIRE((s.normal - Vec3::UnitZ()).norm() < 1e-9);

  // normal orthogonal to the finite-difference surface tangent
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double y = rng.uniform(-0.19, 0.19);
    const double h = 1e-7;
    const double gp = (bump.profile.value(y + h) - bump.profile.value(y - h)) / (2 * h);
    const Vec3 tangent = Vec3(0.0, 1.0, gp).normalized();
    REQUIRE(std::abs(surface_query(bump, y).normal.dot(tangent)) < 1e-6);
  }

  diag::reset_warnings();
  surface_query(bump, 5.0);
  REQUIRE(diag::warning_count() > 0);
}

TEST_CASE("path features vanish for perfect lookahead tracking", "[geometry]") {
  const Scene scene = build_scene(SceneConfig{});
  const auto& path = scene.path;
  // at the last point every lookahead index clamps to the last point
  const auto& last = path.points.back();
  const auto feats = path_features(path, last.position,
                                   0.05 * last.direction, 0.05);
  REQUIRE(feats.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("path features at rest equal scaled path directions", "[geometry]") {
  const Scene scene = build_scene(SceneConfig{});
  const auto& path = scene.path;
  const Vec3 x = path.points[100].position;
  const auto feats = path_features(path, x, Vec3::Zero(), 0.05);
  const int stride = std::max(
      1, static_cast<int>(std::llround(0.05 / (5 * path.spacing))));
  for (int i = 1; i <= 5; ++i) {
    const int idx = std::min(100 + i * stride, path.size() - 1);
    const Vec3 expect = 0.05 * path.points[idx].direction;
    REQUIRE((feats.block<1, 3>(i - 1, 3).transpose() - expect).norm() < 1e-12);
  }
}

TEST_CASE("path features match the brute-force nearest scan", "[geometry]") {
  const Scene scene = build_scene(SceneConfig{});
  const auto& path = scene.path;
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec3 x(rng.uniform(0.0, 0.2), rng.uniform(-0.1, 0.45), rng.uniform(0.0, 0.15));
    const Vec3 v(rng.normal(0, 0.05), rng.normal(0, 0.05), rng.normal(0, 0.05));
    // independent oracle: full scan for the nearest index, then assemble rows
    int m = 0;
    double best = 1e18;
    for (int i = 0; i < path.size(); ++i) {
      const double d = (path.points[i].position - x).norm();
      if (d < best) {
        best = d;
        m = i;
      }
    }
    const int stride = std::max(
        1, static_cast<int>(std::llround(0.05 / (5 * path.spacing))));
    const auto feats = path_features(path, x, v, 0.05);
    for (int i = 1; i <= 5; ++i) {
      const int idx = std::min(m + i * stride, path.size() - 1);
      const Vec3 dpos = path.points[idx].position - x;
      const Vec3 dvel = 0.05 * path.points[idx].direction - v;
      REQUIRE((feats.block<1, 3>(i - 1, 0).transpose() - dpos).norm() == 0.0);
      REQUIRE((feats.block<1, 3>(i - 1, 3).transpose() - dvel).norm() == 0.0);
    }
  }
}

TEST_CASE("cubic profile spline interpolates knots with C1 continuity", "[geometry]") {
  const SceneConfig cfg;
  const CubicSpline1D g(cfg.profile_y, cfg.profile_z);
  for (std::size_t i = 0; i < cfg.profile_y.size(); ++i)
    REQUIRE(g.value(cfg.profile_y[i]) == Catch::Approx(cfg.profile_z[i]).margin(1e-12));
  for (std::size_t i = 1; i + 1 < cfg.profile_y.size(); ++i) {
    const double y = cfg.profile_y[i];
    const double h = 1e-7;
    const double left = (g.value(y) - g.value(y - h)) / h;
    const double right = (g.value(y + h) - g.value(y)) / h;
    REQUIRE(std::abs(left - right) < 1e-5);
  }
}
