#include <catch2/catch_amalgamated.hpp>

#include "polish/env.hpp"
#include "polish/nominal.hpp"
#include "polish/scene.hpp"

using namespace polish;

namespace {

NominalConfig sim_nominal(const char* preset = "untuned") {
  NominalConfig c;
  c.search_radius = 0.016;
  c.indent = 0.05;
  c.gains = gain_preset(preset);
  return c;
}

}  // namespace

TEST_CASE("control point selection on a straight path", "[nominal]") {
  ViaPoint a, b;
  a.position = Vec3(0.1, 0.0, 0.05);
  a.direction = b.direction = Vec3::UnitY();
  b.position = Vec3(0.1, 0.1, 0.05);
  const auto spline = PositionSpline::from_via_points({a, b});
  const auto path = discretize_path(spline, {Quat::Identity(), Quat::Identity()}, 5e-4);

  // on-path at index 0: farthest point within 0.016 m is 32 indices ahead
  const int idx = select_control_point(path, path.points[0].position, 0.016);
  REQUIRE(idx == 32);
  REQUIRE((path.points[idx].position - path.points[0].position).norm() <= 0.016);

  // 1 m off the path: nearest-point fallback
  const Vec3 far(0.1, -1.0, 0.05);
  REQUIRE(select_control_point(path, far, 0.016) == path.closest_index(far));

  // radius larger than the whole path: last point
  REQUIRE(select_control_point(path, path.points[0].position, 10.0) == path.size() - 1);
}

TEST_CASE("control point selection matches the brute-force oracle", "[nominal]") {
  const Scene scene = build_scene(SceneConfig{});
  const auto& path = scene.path;
  Rng rng(13);
  for (int t = 0; t < 1000; ++t) {
    const Vec3 x(rng.uniform(0.05, 0.15), rng.uniform(-0.1, 0.45), rng.uniform(0.0, 0.12));
    const double radius = rng.uniform(0.005, 0.05);
    // oracle: argmax index among points within the radius, else global nearest
    int expect = -1;
    for (int i = 0; i < path.size(); ++i)
      if ((path.points[i].position - x).norm() <= radius) expect = i;
    if (expect < 0) {
      double best = 1e18;
      for (int i = 0; i < path.size(); ++i) {
        const double d = (path.points[i].position - x).norm();
        if (d < best) {
          best = d;
          expect = i;
        }
      }
    }
    REQUIRE(select_control_point(path, x, radius) == expect);
  }
}

TEST_CASE("nominal action offsets point at the indented reference", "[nominal]") {
  const Scene scene = build_scene(SceneConfig{});

  // flat surface with the paper's baseline indentation: reference sits
  // exactly 0.012 m below the selected path point
  WorkpieceModel flat;
  flat.profile = CubicSpline1D({-1.0, 1.0}, {0.05, 0.05});
  flat.x_min = -1.0;
  flat.x_max = 1.0;
  ViaPoint a, b;
  a.position = Vec3(0.1, 0.0, 0.05);
  a.direction = b.direction = Vec3::UnitY();
  b.position = Vec3(0.1, 0.2, 0.05);
  const auto spline = PositionSpline::from_via_points({a, b});
  const auto path = discretize_path(spline, {Quat::Identity(), Quat::Identity()}, 5e-4);

  NominalConfig cfg;
  cfg.search_radius = 0.016;
  cfg.indent = 0.012;
  cfg.gains = gain_preset("untuned");
  Pose pose;
  pose.position = path.points[40].position;
  const HybridAction act = nominal_action(path, flat, pose, cfg);
  const int ref_idx = select_control_point(path, pose.position, cfg.search_radius);
  const Vec3 expect_ref = path.points[ref_idx].position - 0.012 * Vec3::UnitZ();
  REQUIRE((act.dpose.head<3>() - (expect_ref - pose.position)).norm() < 1e-12);

  // orientation already matching the keyframe: zero rotation-vector part
  pose.orientation = path.points[ref_idx].orientation;
  const HybridAction act2 = nominal_action(path, flat, pose, cfg);
  REQUIRE(act2.dpose.tail<3>().norm() < 1e-9);

  // determinism
  const HybridAction act3 = nominal_action(path, flat, pose, cfg);
  REQUIRE(act2.to_vector() == act3.to_vector());

  // gains pass through from the config
  REQUIRE(act.gains.stiffness[1] == 160.0);
  REQUIRE(act.gains.damping_factor == 1.0);
  (void)scene;
}

TEST_CASE("gain presets carry the published values", "[nominal]") {
  const auto untuned = gain_preset("untuned");
  REQUIRE(untuned.stiffness[0] == 500.0);
  REQUIRE(untuned.stiffness[1] == 160.0);
  REQUIRE(untuned.stiffness[2] == 50.0);
  REQUIRE(untuned.damping_factor == 1.0);
  const auto tuned = gain_preset("tuned");
  REQUIRE(tuned.stiffness[1] == 107.0);
  REQUIRE(tuned.stiffness[2] == 68.0);
  REQUIRE(tuned.damping_factor == Catch::Approx(0.9562));
  const auto hw = gain_preset("hardware-untuned");
  REQUIRE(hw.stiffness[1] == 1085.0);
  REQUIRE_THROWS_AS(gain_preset("nope"), ConfigError);
}

TEST_CASE("gain profile lookup uses closed-left sections", "[nominal]") {
  GainProfile p;
  p.base = gain_preset("untuned");
  p.rows = {{0.0, 0.1, 100, 50, 0.9}, {0.1, 0.2, 120, 60, 1.0}};
  p.validate();
  REQUIRE(p.gains_at(0.05).stiffness[1] == 100.0);
  // boundary belongs to the upper (right) section under closed-left intervals
  REQUIRE(p.gains_at(0.1).stiffness[1] == 120.0);
  REQUIRE(p.gains_at(0.099999).stiffness[1] == 100.0);
  // out-of-range clamps to the nearest section
  REQUIRE(p.gains_at(-1.0).stiffness[1] == 100.0);
  REQUIRE(p.gains_at(5.0).stiffness[1] == 120.0);
  // base gains carried for the fixed axes
  REQUIRE(p.gains_at(0.05).stiffness[0] == 500.0);

  GainProfile bad;
  bad.base = p.base;
  bad.rows = {{0.0, 0.1, 100, 50, 0.9}, {0.15, 0.2, 120, 60, 1.0}};
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("nominal rollout with tuned gains progresses monotonically", "[nominal]") {
  const Scene scene = build_scene(SceneConfig{});
  EnvConfig cfg;
  PolishEnv env(scene.path, scene.workpiece, scene.vias, cfg);
  env.reset(21);
  const NominalConfig nom = sim_nominal("tuned");

  int prev_idx = -1;
  bool reached_last = false;
  while (!env.done()) {
    const HybridAction a =
        nominal_action(scene.path, scene.workpiece, env.tool_state().pose, nom);
    env.step(a, 0.0);
    const int idx =
        select_control_point(scene.path, env.tool_state().pose.position, nom.search_radius);
    if (!reached_last) {
      REQUIRE(idx >= prev_idx);
      prev_idx = idx;
      if (idx == scene.path.size() - 1) reached_last = true;
    }
  }
  REQUIRE(prev_idx > 0);
}
