#pragma once

#include <json.hpp>

#include <fstream>
#include <set>
#include <string>

#include "polish/cheq.hpp"
#include "polish/env.hpp"
#include "polish/sac.hpp"
#include "polish/scene.hpp"
#include "polish/tune.hpp"

namespace polish {

using Json = nlohmann::json;

struct TuneParams {
  int budget = 300;
  int sections = 5;
  ScoreWeights weights;
};

struct RunParams {
  long steps = 200000;
  long episodes = 0;  // optional episode cap; 0 = unlimited
  long eval_every = 5000;
  int eval_episodes = 1;
  int final_eval_episodes = 3;
  long checkpoint_every = 0;  // steps; 0 = final checkpoint only
  int log_updates_every = 10;
  bool log_cheq_steps = true;
};

// One config object carries every constant of every module; the named
// profile fills the defaults and the config file overrides individual keys.
struct RunConfig {
  std::string profile = "sim";
  std::uint64_t seed = 0;
  SceneConfig scene;
  EnvConfig env;
  NominalConfig nominal;
  std::string nominal_preset = "untuned";
  SacConfig sac;
  CheqConfig cheq;
  ActionSpace actions = ActionSpace::polishing();
  GainSearchSpace search;
  TuneParams tune;
  RunParams run;

  void validate() const {
    env.validate();
    nominal.validate();
    sac.validate();
    cheq.validate();
    actions.validate();
    search.validate();
    if (run.steps < 1) throw ConfigError("run.steps must be >= 1");
  }
};

inline RunConfig sim_profile() {
  RunConfig c;
  c.profile = "sim";
  c.sac.obs_dim = 47;
  c.sac.action_dim = 13;
  c.sac.hidden = {256, 256};
  c.sac.ensemble_size = 5;
  c.sac.utd = 1;
  c.sac.target_entropy = -13;
  c.nominal.search_radius = 0.016;
  c.nominal.indent = 0.05;
  c.nominal.gains = gain_preset("untuned");
  return c;
}

// Paper-style hardware rows on the desk-scale simulator: slower control,
// shorter horizon, larger ensemble, conservative uncertainty limits.
inline RunConfig hardware_like_profile() {
  RunConfig c = sim_profile();
  c.profile = "hardware-like";
  c.env.control_hz = 20.0;
  c.env.horizon = 150;
  c.env.weights = RewardWeights{-1.0, 0.03, 0.1, 0.05, 0.35, 0.2, 0.3};
  c.env.bounds = RewardBounds{0.015, 0.03, 0.03, 0.6, 4.0, 1.5};
  c.sac.ensemble_size = 10;
  c.sac.utd = 2;
  c.cheq.u_min = 0.015;
  c.cheq.u_max = 0.1;
  c.cheq.window = 10;
  c.nominal.search_radius = 0.015;
  c.nominal.indent = 0.002;
  c.nominal.gains = gain_preset("hardware-untuned");
  return c;
}

inline RunConfig make_profile(const std::string& name) {
  if (name == "sim") return sim_profile();
  if (name == "hardware-like") return hardware_like_profile();
  throw ConfigError("unknown profile: " + name);
}

namespace detail {

class StrictObject {
 public:
  StrictObject(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_ + " must be a JSON object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  const Json* child(const std::string& key) {
    if (!has(key)) return nullptr;
    return &j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw ConfigError("unknown config key: " + path_ + "." + item.key());
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void get_pair(StrictObject& o, const std::string& key, double& lo, double& hi) {
  if (const Json* j = o.child(key)) {
    if (!j->is_array() || j->size() != 2)
      throw ConfigError("config key " + key + " must be [lo, hi]");
    lo = (*j)[0].get<double>();
    hi = (*j)[1].get<double>();
  }
}

}  // namespace detail

inline void apply_overrides(RunConfig& c, const Json& j) {
  detail::StrictObject root(j, "config");
  root.get("profile", c.profile);
  root.get("seed", c.seed);

  if (const Json* js = root.child("scene")) {
    detail::StrictObject o(*js, "scene");
    o.get("profile_y", c.scene.profile_y);
    o.get("profile_z", c.scene.profile_z);
    o.get("via_y", c.scene.via_y);
    o.get("lane_x", c.scene.lane_x);
    o.get("spacing", c.scene.spacing);
    o.get("x_min", c.scene.x_min);
    o.get("x_max", c.scene.x_max);
    o.get("contact_stiffness", c.scene.contact_stiffness);
    o.get("contact_damping", c.scene.contact_damping);
    o.get("friction", c.scene.friction);
    o.finish();
  }
  if (const Json* je = root.child("env")) {
    detail::StrictObject o(*je, "env");
    o.get("force_target", c.env.force_target);
    o.get("speed_target", c.env.speed_target);
    o.get("horizon", c.env.horizon);
    o.get("control_hz", c.env.control_hz);
    o.get("physics_dt", c.env.physics_dt);
    if (const Json* jw = o.child("weights")) {
      detail::StrictObject w(*jw, "env.weights");
      w.get("trunc", c.env.weights.trunc);
      w.get("term", c.env.weights.term);
      w.get("c_perp", c.env.weights.c_perp);
      w.get("c_par", c.env.weights.c_par);
      w.get("v", c.env.weights.v);
      w.get("d", c.env.weights.d);
      w.get("f", c.env.weights.f);
      w.finish();
    }
    if (const Json* jb = o.child("bounds")) {
      detail::StrictObject b(*jb, "env.bounds");
      b.get("c_perp_max", c.env.bounds.c_perp_max);
      b.get("c_par_max", c.env.bounds.c_par_max);
      b.get("v_max", c.env.bounds.v_max);
      b.get("d_max", c.env.bounds.d_max);
      b.get("f_max", c.env.bounds.f_max);
      b.get("f_mid", c.env.bounds.f_mid);
      b.finish();
    }
    if (const Json* jsafe = o.child("safety")) {
      detail::StrictObject s(*jsafe, "env.safety");
      s.get("x_lo", c.env.safety.x_lo);
      s.get("x_hi", c.env.safety.x_hi);
      s.get("y_lo", c.env.safety.y_lo);
      s.get("y_hi", c.env.safety.y_hi);
      s.get("z_lo", c.env.safety.z_lo);
      s.get("z_hi", c.env.safety.z_hi);
      s.get("phi_x_min", c.env.safety.phi_x_min);
      s.get("phi_yz_max", c.env.safety.phi_yz_max);
      s.get("speed_max", c.env.safety.speed_max);
      s.get("force_max", c.env.safety.force_max);
      s.get("table_z", c.env.safety.table_z);
      s.finish();
    }
    o.get("wipe_tolerance", c.env.wipe_tolerance);
    o.get("wipe_force_threshold", c.env.wipe_force_threshold);
    o.get("reset_lift", c.env.reset_lift);
    o.get("reset_jitter", c.env.reset_jitter);
    o.get("mrr_coefficient", c.env.mrr_coefficient);
    o.get("tool_mass", c.env.tool.mass);
    o.get("tool_inertia", c.env.tool.inertia);
    o.get("sensor_noise_sigma", c.env.sensor_noise_sigma);
    o.get("sensor_cutoff_hz", c.env.sensor_cutoff_hz);
    o.get("path_feature_k", c.env.path_feature_k);
    o.get("path_feature_lookahead", c.env.path_feature_lookahead);
    o.finish();
  }
  if (const Json* jn = root.child("nominal")) {
    detail::StrictObject o(*jn, "nominal");
    o.get("search_radius", c.nominal.search_radius);
    o.get("indent", c.nominal.indent);
    if (o.has("preset")) {
      c.nominal_preset = jn->at("preset").get<std::string>();
      c.nominal.gains = gain_preset(c.nominal_preset);
    }
    o.finish();
  }
  if (const Json* jsac = root.child("sac")) {
    detail::StrictObject o(*jsac, "sac");
    o.get("hidden", c.sac.hidden);
    o.get("lr", c.sac.lr);
    o.get("gamma", c.sac.gamma);
    o.get("polyak_xi", c.sac.polyak_xi);
    o.get("batch_size", c.sac.batch_size);
    o.get("utd", c.sac.utd);
    o.get("ensemble_size", c.sac.ensemble_size);
    o.get("alpha_init", c.sac.alpha_init);
    o.get("alpha_autotune", c.sac.alpha_autotune);
    o.get("target_entropy", c.sac.target_entropy);
    o.get("random_steps", c.sac.random_steps);
    o.get("buffer_capacity", c.sac.buffer_capacity);
    o.get("log_std_min", c.sac.log_std_min);
    o.get("log_std_max", c.sac.log_std_max);
    o.get("actor_final_scale", c.sac.actor_final_scale);
    o.finish();
  }
  if (const Json* jc = root.child("cheq")) {
    detail::StrictObject o(*jc, "cheq");
    o.get("lambda_min", c.cheq.lambda_min);
    o.get("lambda_max", c.cheq.lambda_max);
    o.get("u_min", c.cheq.u_min);
    o.get("u_max", c.cheq.u_max);
    o.get("window", c.cheq.window);
    o.get("random_lambda_lo", c.cheq.random_lambda_lo);
    o.get("random_lambda_hi", c.cheq.random_lambda_hi);
    o.get("lambda_init", c.cheq.lambda_init);
    o.finish();
  }
  if (const Json* ja = root.child("actions")) {
    detail::StrictObject o(*ja, "actions");
    double dpos = 0.03, drot = 0.2;
    double kx_lo = c.actions.lo[6], kx_hi = c.actions.hi[6];
    double ky_lo = c.actions.lo[7], ky_hi = c.actions.hi[7];
    double kz_lo = c.actions.lo[8], kz_hi = c.actions.hi[8];
    double krot_lo = c.actions.lo[9], krot_hi = c.actions.hi[9];
    double zeta_lo = c.actions.lo[12], zeta_hi = c.actions.hi[12];
    o.get("dpos", dpos);
    o.get("drot", drot);
    detail::get_pair(o, "kx", kx_lo, kx_hi);
    detail::get_pair(o, "ky", ky_lo, ky_hi);
    detail::get_pair(o, "kz", kz_lo, kz_hi);
    detail::get_pair(o, "krot", krot_lo, krot_hi);
    detail::get_pair(o, "zeta", zeta_lo, zeta_hi);
    c.actions.lo << -dpos, -dpos, -dpos, -drot, -drot, -drot, kx_lo, ky_lo, kz_lo,
        krot_lo, krot_lo, krot_lo, zeta_lo;
    c.actions.hi << dpos, dpos, dpos, drot, drot, drot, kx_hi, ky_hi, kz_hi, krot_hi,
        krot_hi, krot_hi, zeta_hi;
    o.finish();
  }
  if (const Json* jt = root.child("tune")) {
    detail::StrictObject o(*jt, "tune");
    o.get("budget", c.tune.budget);
    o.get("sections", c.tune.sections);
    o.get("w_c", c.tune.weights.w_c);
    o.get("w_w", c.tune.weights.w_w);
    o.get("w_f", c.tune.weights.w_f);
    o.get("w_v", c.tune.weights.w_v);
    detail::get_pair(o, "ky", c.search.ky_lo, c.search.ky_hi);
    detail::get_pair(o, "kz", c.search.kz_lo, c.search.kz_hi);
    detail::get_pair(o, "zeta", c.search.zeta_lo, c.search.zeta_hi);
    o.get("k_x", c.search.k_x);
    o.get("k_rot", c.search.k_rot);
    o.finish();
  }
  if (const Json* jr = root.child("run")) {
    detail::StrictObject o(*jr, "run");
    o.get("steps", c.run.steps);
    o.get("episodes", c.run.episodes);
    o.get("eval_every", c.run.eval_every);
    o.get("eval_episodes", c.run.eval_episodes);
    o.get("final_eval_episodes", c.run.final_eval_episodes);
    o.get("checkpoint_every", c.run.checkpoint_every);
    o.get("log_updates_every", c.run.log_updates_every);
    o.get("log_cheq_steps", c.run.log_cheq_steps);
    o.finish();
  }
  root.finish();
}

// Loads a config file: the profile key picks the defaults, remaining keys
// override them.
inline RunConfig load_config(const Json& j) {
  std::string profile = "sim";
  if (j.contains("profile")) profile = j.at("profile").get<std::string>();
  RunConfig c = make_profile(profile);
  apply_overrides(c, j);
  c.validate();
  return c;
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return load_config(j);
}

inline Json to_json(const RunConfig& c) {
  Json j;
  j["profile"] = c.profile;
  j["seed"] = c.seed;
  j["scene"] = {{"profile_y", c.scene.profile_y},
                {"profile_z", c.scene.profile_z},
                {"via_y", c.scene.via_y},
                {"lane_x", c.scene.lane_x},
                {"spacing", c.scene.spacing},
                {"x_min", c.scene.x_min},
                {"x_max", c.scene.x_max},
                {"contact_stiffness", c.scene.contact_stiffness},
                {"contact_damping", c.scene.contact_damping},
                {"friction", c.scene.friction}};
  j["env"] = {{"force_target", c.env.force_target},
              {"speed_target", c.env.speed_target},
              {"horizon", c.env.horizon},
              {"control_hz", c.env.control_hz},
              {"physics_dt", c.env.physics_dt},
              {"weights",
               {{"trunc", c.env.weights.trunc},
                {"term", c.env.weights.term},
                {"c_perp", c.env.weights.c_perp},
                {"c_par", c.env.weights.c_par},
                {"v", c.env.weights.v},
                {"d", c.env.weights.d},
                {"f", c.env.weights.f}}},
              {"bounds",
               {{"c_perp_max", c.env.bounds.c_perp_max},
                {"c_par_max", c.env.bounds.c_par_max},
                {"v_max", c.env.bounds.v_max},
                {"d_max", c.env.bounds.d_max},
                {"f_max", c.env.bounds.f_max},
                {"f_mid", c.env.bounds.f_mid}}},
              {"safety",
               {{"x_lo", c.env.safety.x_lo},
                {"x_hi", c.env.safety.x_hi},
                {"y_lo", c.env.safety.y_lo},
                {"y_hi", c.env.safety.y_hi},
                {"z_lo", c.env.safety.z_lo},
                {"z_hi", c.env.safety.z_hi},
                {"phi_x_min", c.env.safety.phi_x_min},
                {"phi_yz_max", c.env.safety.phi_yz_max},
                {"speed_max", c.env.safety.speed_max},
                {"force_max", c.env.safety.force_max},
                {"table_z", c.env.safety.table_z}}},
              {"wipe_tolerance", c.env.wipe_tolerance},
              {"wipe_force_threshold", c.env.wipe_force_threshold},
              {"reset_lift", c.env.reset_lift},
              {"reset_jitter", c.env.reset_jitter},
              {"mrr_coefficient", c.env.mrr_coefficient},
              {"tool_mass", c.env.tool.mass},
              {"tool_inertia", c.env.tool.inertia},
              {"sensor_noise_sigma", c.env.sensor_noise_sigma},
              {"sensor_cutoff_hz", c.env.sensor_cutoff_hz},
              {"path_feature_k", c.env.path_feature_k},
              {"path_feature_lookahead", c.env.path_feature_lookahead}};
  j["nominal"] = {{"search_radius", c.nominal.search_radius},
                  {"indent", c.nominal.indent},
                  {"preset", c.nominal_preset}};
  j["sac"] = {{"hidden", c.sac.hidden},
              {"lr", c.sac.lr},
              {"gamma", c.sac.gamma},
              {"polyak_xi", c.sac.polyak_xi},
              {"batch_size", c.sac.batch_size},
              {"utd", c.sac.utd},
              {"ensemble_size", c.sac.ensemble_size},
              {"alpha_init", c.sac.alpha_init},
              {"alpha_autotune", c.sac.alpha_autotune},
              {"target_entropy", c.sac.target_entropy},
              {"random_steps", c.sac.random_steps},
              {"buffer_capacity", c.sac.buffer_capacity},
              {"log_std_min", c.sac.log_std_min},
              {"log_std_max", c.sac.log_std_max},
              {"actor_final_scale", c.sac.actor_final_scale}};
  j["cheq"] = {{"lambda_min", c.cheq.lambda_min},
               {"lambda_max", c.cheq.lambda_max},
               {"u_min", c.cheq.u_min},
               {"u_max", c.cheq.u_max},
               {"window", c.cheq.window},
               {"random_lambda_lo", c.cheq.random_lambda_lo},
               {"random_lambda_hi", c.cheq.random_lambda_hi},
               {"lambda_init", c.cheq.lambda_init}};
  j["actions"] = {{"dpos", c.actions.hi[0]},
                  {"drot", c.actions.hi[3]},
                  {"kx", {c.actions.lo[6], c.actions.hi[6]}},
                  {"ky", {c.actions.lo[7], c.actions.hi[7]}},
                  {"kz", {c.actions.lo[8], c.actions.hi[8]}},
                  {"krot", {c.actions.lo[9], c.actions.hi[9]}},
                  {"zeta", {c.actions.lo[12], c.actions.hi[12]}}};
  j["tune"] = {{"budget", c.tune.budget},
               {"sections", c.tune.sections},
               {"w_c", c.tune.weights.w_c},
               {"w_w", c.tune.weights.w_w},
               {"w_f", c.tune.weights.w_f},
               {"w_v", c.tune.weights.w_v},
               {"ky", {c.search.ky_lo, c.search.ky_hi}},
               {"kz", {c.search.kz_lo, c.search.kz_hi}},
               {"zeta", {c.search.zeta_lo, c.search.zeta_hi}},
               {"k_x", c.search.k_x},
               {"k_rot", c.search.k_rot}};
  j["run"] = {{"steps", c.run.steps},
              {"episodes", c.run.episodes},
              {"eval_every", c.run.eval_every},
              {"eval_episodes", c.run.eval_episodes},
              {"final_eval_episodes", c.run.final_eval_episodes},
              {"checkpoint_every", c.run.checkpoint_every},
              {"log_updates_every", c.run.log_updates_every},
              {"log_cheq_steps", c.run.log_cheq_steps}};
  return j;
}

// FNV-1a over the canonical (key-sorted) dump of the experiment-defining
// sections. Runtime orchestration (run.*) stays out so a resumed run may
// extend the step budget or logging cadence.
inline std::uint64_t config_hash(const RunConfig& c) {
  Json j = to_json(c);
  j.erase("run");
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : s) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace polish
