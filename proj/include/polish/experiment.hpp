#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "polish/checkpoint.hpp"
#include "polish/config.hpp"
#include "polish/metrics.hpp"

namespace polish {

namespace fs = std::filesystem;

enum class TrainMode { cheq, sac_safe, sac_unsafe };

inline const char* train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::cheq: return "cheq";
    case TrainMode::sac_safe: return "sac-safe";
    case TrainMode::sac_unsafe: return "sac-unsafe";
  }
  return "?";
}

inline TrainMode parse_train_mode(const std::string& s) {
  if (s == "cheq") return TrainMode::cheq;
  if (s == "sac-safe") return TrainMode::sac_safe;
  if (s == "sac-unsafe") return TrainMode::sac_unsafe;
  throw ConfigError("unknown train mode: " + s);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(master ^ stream_id(label)) ^
                    splitmix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

// Net-input conditioning: fixed per-slot scales that bring the observation
// components to comparable magnitudes.
inline VectorXd observation_scales() {
  VectorXd s(47);
  s.segment<3>(0).setConstant(2.0);    // position [m]
  s.segment<4>(3).setConstant(1.0);    // quaternion
  s.segment<3>(7).setConstant(4.0);    // linear velocity [m/s]
  s.segment<3>(10).setConstant(1.0);   // angular velocity [rad/s]
  s.segment<3>(13).setConstant(0.2);   // force [N]
  s.segment<30>(16).setConstant(10.0); // path features
  s[46] = 1.0;                         // weight
  return s;
}

// Everything a run needs, built once from the config.
struct World {
  Scene scene;
  EnvConfig env_config;
  NominalConfig nominal;
  GainProfile profile;  // optional section-wise gains
  bool has_profile = false;

  explicit World(const RunConfig& cfg) : scene(build_scene(cfg.scene)) {
    env_config = cfg.env;
    nominal = cfg.nominal;
  }

  PolishEnv make_env(bool truncate_on_violation = true) const {
    EnvConfig c = env_config;
    c.truncate_on_violation = truncate_on_violation;
    return PolishEnv(scene.path, scene.workpiece, scene.vias, c);
  }

  PriorController prior() const {
    return PriorController{&scene.path, &scene.workpiece, nominal,
                           has_profile ? &profile : nullptr};
  }
};

inline SacTrainer make_trainer(const RunConfig& cfg, std::uint64_t seed) {
  SacConfig sc = cfg.sac;
  sc.obs_scale = observation_scales();
  return SacTrainer(sc, cfg.actions, seed);
}

struct EpisodeResult {
  double episode_return = 0.0;
  int length = 0;
  int wipes = 0;
  bool terminated = false;
  bool truncated_by_safety = false;
  bool diverged = false;
  std::optional<Violation> first_violation;
  long violation_steps = 0;
  double coverage = 0.0;
  double mean_mrr_dev = 0.0;
  double mean_lambda = 0.0;
  double mean_force = 0.0;
  double mean_speed = 0.0;
  EpisodeStats stats;  // tuning-style stats of the same episode
};

namespace detail_exp {

struct EpisodeAccum {
  double ret = 0.0, mrr_dev = 0.0, lambda_sum = 0.0, force = 0.0, speed = 0.0;
  double fdev = 0.0, vdev = 0.0;
  long contact = 0;
  int n = 0;

  void add(const StepOutcome& out, double lambda, const PolishEnv& env) {
    ret += out.reward;
    const double target_mrr = env.config().mrr_coefficient *
                              env.config().force_target * env.config().speed_target;
    mrr_dev += std::abs(out.info.mrr - target_mrr);
    lambda_sum += lambda;
    force += out.info.sensed_force;
    speed += out.info.tangential_speed;
    fdev += std::abs(out.info.sensed_force - env.config().force_target);
    vdev += std::abs(out.info.tangential_speed - env.config().speed_target);
    if (env.last_contact().penetration > 0.0) ++contact;
    ++n;
  }

  EpisodeResult finish(const PolishEnv& env, bool diverged) const {
    EpisodeResult r;
    r.episode_return = ret;
    r.length = n;
    r.wipes = env.wipe_count();
    r.diverged = diverged;
    r.first_violation = env.first_violation();
    r.violation_steps = env.violation_steps();
    r.coverage = env.y_coverage();
    if (n > 0) {
      r.mean_mrr_dev = mrr_dev / n;
      r.mean_lambda = lambda_sum / n;
      r.mean_force = force / n;
      r.mean_speed = speed / n;
    }
    r.stats.total_steps = n;
    r.stats.contact_steps = contact;
    r.stats.wipes = env.wipe_count();
    r.stats.mean_force_dev = n > 0 ? fdev / n : 0.0;
    r.stats.mean_speed_dev = n > 0 ? vdev / n : 0.0;
    r.stats.truncated = diverged;
    r.stats.episode_return = ret;
    return r;
  }
};

}  // namespace detail_exp

// One nominal-controller episode (weight zero, no agent).
inline EpisodeResult nominal_episode(const World& world, PolishEnv& env,
                                     std::uint64_t seed) {
  const PriorController prior = world.prior();
  env.reset(seed);
  detail_exp::EpisodeAccum acc;
  bool diverged = false;
  try {
    while (!env.done()) {
      const HybridAction a = prior.action(env.tool_state().pose);
      const StepOutcome out = env.step(a, 0.0);
      acc.add(out, 0.0, env);
    }
  } catch (const DivergedError&) {
    diverged = true;
  }
  EpisodeResult r = acc.finish(env, diverged);
  r.terminated = env.wipe_count() == static_cast<int>(env.vias().size());
  r.truncated_by_safety = env.first_violation().has_value() &&
                          env.config().truncate_on_violation;
  return r;
}

// Deterministic evaluation episode for a trained agent.
struct EvalTraceRow {
  int t = 0;
  double y = 0.0, force = 0.0, speed = 0.0, lambda = 0.0;
  double k_y = 0.0, k_z = 0.0, zeta = 0.0;
  double mrr = 0.0;
};

inline EpisodeResult agent_eval_episode(SacTrainer& trainer, const World& world,
                                        TrainMode mode, const CheqConfig& cheq_cfg,
                                        std::uint64_t seed,
                                        std::vector<EvalTraceRow>* trace = nullptr) {
  PolishEnv env = world.make_env(mode != TrainMode::sac_unsafe);
  const PriorController prior = world.prior();
  UncertaintyWindow window(cheq_cfg.window);
  VectorXd obs = env.reset(seed);
  obs[46] = mode == TrainMode::cheq ? cheq_cfg.lambda_init : 1.0;
  detail_exp::EpisodeAccum acc;
  bool diverged = false;
  try {
    while (!env.done()) {
      double lambda = 1.0;
      StepOutcome out;
      HybridAction executed;
      if (mode == TrainMode::cheq) {
        const CheqStepResult r = cheq_rollout_step(trainer, env, prior, cheq_cfg,
                                                   window, obs, /*store=*/false,
                                                   /*forced_lambda=*/{},
                                                   /*deterministic=*/true);
        lambda = r.lambda;
        out = r.outcome;
        executed = r.executed;
      } else {
        const VectorXd a = trainer.sample_action(obs, /*deterministic=*/true).action_physical;
        executed = HybridAction::from_vector(a);
        out = env.step(executed, 1.0);
        obs = out.observation;
      }
      acc.add(out, lambda, env);
      if (trace) {
        EvalTraceRow row;
        row.t = env.steps();
        row.y = env.tool_state().pose.position.y();
        row.force = out.info.sensed_force;
        row.speed = out.info.tangential_speed;
        row.lambda = lambda;
        row.mrr = out.info.mrr;
        row.k_y = executed.gains.stiffness[1];
        row.k_z = executed.gains.stiffness[2];
        row.zeta = executed.gains.damping_factor;
        trace->push_back(row);
      }
    }
  } catch (const DivergedError&) {
    diverged = true;
  }
  EpisodeResult r = acc.finish(env, diverged);
  r.terminated = env.wipe_count() == static_cast<int>(env.vias().size());
  r.truncated_by_safety =
      env.first_violation().has_value() && env.config().truncate_on_violation;
  return r;
}

struct TrainSummary {
  std::string mode;
  std::uint64_t seed = 0;
  long total_steps = 0;
  long episodes = 0;
  long accum_first_violations = 0;
  long violation_steps_total = 0;
  std::vector<double> final_eval_returns;
  double final_eval_return_mean = 0.0;
  fs::path run_dir;
};

// Full training run; writes config echo, metrics, checkpoints, and a summary
// into out_dir. Returns the summary.
inline TrainSummary train_run(const RunConfig& cfg, TrainMode mode,
                              const fs::path& out_dir,
                              const std::optional<fs::path>& resume = {},
                              const std::optional<std::string>& config_echo_source = {}) {
  cfg.validate();
  fs::create_directories(out_dir);

  // config echo: the verbatim input (when given) plus the effective config
  if (config_echo_source) {
    std::ofstream echo(out_dir / "config.json");
    echo << *config_echo_source;
  } else {
    std::ofstream echo(out_dir / "config.json");
    echo << to_json(cfg).dump(2) << '\n';
  }
  {
    std::ofstream eff(out_dir / "config_effective.json");
    eff << to_json(cfg).dump(2) << '\n';
  }

  World world(cfg);
  PolishEnv env = world.make_env(mode != TrainMode::sac_unsafe);
  SacTrainer trainer = make_trainer(cfg, cfg.seed);
  const PriorController prior = world.prior();
  UncertaintyWindow window(cfg.cheq.window);

  long episode_index = 0;
  long accum_first_violations = 0;
  long violation_steps_total = 0;
  const std::uint64_t chash = config_hash(cfg);
  if (resume) {
    const Checkpoint ck = Checkpoint::load(*resume);
    if (static_cast<std::uint64_t>(ck.i64_at("meta/config_hash")) != chash)
      throw ConfigError("refusing to resume: checkpoint config hash mismatch");
    unpack_trainer(ck, trainer);
    episode_index = ck.i64_at("meta/episode_index");
    accum_first_violations = ck.i64_at("meta/accum_first_violations");
    violation_steps_total = ck.i64_at("meta/violation_steps_total");
  }

  JsonlWriter episodes_log(out_dir / "episodes.jsonl");
  JsonlWriter updates_log(out_dir / "updates.jsonl");
  JsonlWriter eval_log(out_dir / "eval.jsonl");
  JsonlWriter steps_log;
  if (mode == TrainMode::cheq && cfg.run.log_cheq_steps)
    steps_log.open(out_dir / "steps.jsonl");

  long next_eval = cfg.run.eval_every > 0
                       ? ((trainer.env_steps() / cfg.run.eval_every) + 1) * cfg.run.eval_every
                       : -1;
  long next_checkpoint =
      cfg.run.checkpoint_every > 0
          ? ((trainer.env_steps() / cfg.run.checkpoint_every) + 1) * cfg.run.checkpoint_every
          : -1;

  auto save_checkpoint = [&](const fs::path& path) {
    Checkpoint ck;
    ck.i64["meta/config_hash"] = {static_cast<std::int64_t>(chash)};
    ck.i64["meta/episode_index"] = {episode_index};
    ck.i64["meta/accum_first_violations"] = {accum_first_violations};
    ck.i64["meta/violation_steps_total"] = {violation_steps_total};
    pack_trainer(ck, trainer, /*include_buffer=*/true);
    ck.save(path);
  };

  auto run_eval_round = [&](long at_step) {
    std::vector<double> returns;
    std::vector<int> wipes;
    for (int k = 0; k < cfg.run.eval_episodes; ++k) {
      const EpisodeResult er = agent_eval_episode(
          trainer, world, mode, cfg.cheq, derive_seed(cfg.seed, "eval", at_step + k));
      returns.push_back(er.episode_return);
      wipes.push_back(er.wipes);
    }
    double mean = 0.0;
    for (double r : returns) mean += r;
    if (!returns.empty()) mean /= static_cast<double>(returns.size());
    eval_log.write({{"step", at_step}, {"returns", returns}, {"mean_return", mean},
                    {"wipes", wipes}});
    eval_log.flush();
  };

  while (trainer.env_steps() < cfg.run.steps &&
         (cfg.run.episodes == 0 || episode_index < cfg.run.episodes)) {
    const std::uint64_t ep_seed = derive_seed(cfg.seed, "episode", episode_index);
    VectorXd obs = env.reset(ep_seed);
    obs[46] = mode == TrainMode::cheq ? cfg.cheq.lambda_init : 1.0;
    window.clear();

    detail_exp::EpisodeAccum acc;
    bool diverged = false;
    try {
      while (!env.done()) {
        double lambda = 1.0;
        StepOutcome out;
        if (mode == TrainMode::cheq) {
          const CheqStepResult r =
              cheq_rollout_step(trainer, env, prior, cfg.cheq, window, obs);
          lambda = r.lambda;
          out = r.outcome;
          if (steps_log.is_open())
            steps_log.write({{"step", trainer.env_steps()},
                             {"t", env.steps()},
                             {"u_raw", r.u_raw},
                             {"u_smooth", r.u_smooth},
                             {"lambda", r.lambda}});
        } else {
          VectorXd a;
          if (trainer.in_random_phase()) {
            a = trainer.random_action();
          } else {
            a = trainer.sample_action(obs).action_physical;
          }
          out = env.step(HybridAction::from_vector(a), 1.0);
          Transition t;
          t.state = obs.cast<float>();
          t.rl_action = a.cast<float>();
          t.reward = static_cast<float>(out.reward);
          t.next_state = out.observation.cast<float>();
          t.terminated = out.terminated;
          t.truncated = out.truncated;
          trainer.observe(std::move(t));
          obs = out.observation;
        }
        acc.add(out, lambda, env);

        const auto stats = trainer.maybe_update();
        if (!stats.empty() && cfg.run.log_updates_every > 0 &&
            trainer.updates_done() % cfg.run.log_updates_every == 0) {
          const UpdateStats& s = stats.back();
          updates_log.write({{"step", trainer.env_steps()},
                             {"update", trainer.updates_done()},
                             {"critic_loss", s.critic_loss},
                             {"actor_loss", s.actor_loss},
                             {"alpha", s.alpha},
                             {"entropy", s.entropy}});
        }
        if (next_eval > 0 && trainer.env_steps() >= next_eval) {
          run_eval_round(trainer.env_steps());
          next_eval += cfg.run.eval_every;
        }
      }
    } catch (const DivergedError&) {
      diverged = true;
    }

    EpisodeResult er = acc.finish(env, diverged);
    er.terminated = env.wipe_count() == static_cast<int>(env.vias().size());
    er.truncated_by_safety =
        env.first_violation().has_value() && env.config().truncate_on_violation;
    if (er.first_violation) ++accum_first_violations;
    violation_steps_total += er.violation_steps;

    episodes_log.write(
        {{"episode", episode_index},
         {"end_step", trainer.env_steps()},
         {"len", er.length},
         {"return", er.episode_return},
         {"wipes", er.wipes},
         {"terminated", er.terminated},
         {"truncated_safety", er.truncated_by_safety},
         {"diverged", er.diverged},
         {"first_violation",
          er.first_violation ? Json(violation_name(*er.first_violation)) : Json()},
         {"violation_steps", er.violation_steps},
         {"accum_first_violations", accum_first_violations},
         {"coverage", er.coverage},
         {"mean_lambda", er.mean_lambda},
         {"mean_force", er.mean_force},
         {"mean_speed", er.mean_speed},
         {"mrr_dev", er.mean_mrr_dev}});
    episodes_log.flush();
    ++episode_index;

    if (next_checkpoint > 0 && trainer.env_steps() >= next_checkpoint) {
      save_checkpoint(out_dir / "checkpoint_latest.bin");
      next_checkpoint += cfg.run.checkpoint_every;
    }
  }

  // final deterministic evaluation + checkpoint
  TrainSummary summary;
  summary.mode = train_mode_name(mode);
  summary.seed = cfg.seed;
  summary.total_steps = trainer.env_steps();
  summary.episodes = episode_index;
  summary.accum_first_violations = accum_first_violations;
  summary.violation_steps_total = violation_steps_total;
  for (int k = 0; k < cfg.run.final_eval_episodes; ++k) {
    const EpisodeResult er = agent_eval_episode(trainer, world, mode, cfg.cheq,
                                                derive_seed(cfg.seed, "final-eval", k));
    summary.final_eval_returns.push_back(er.episode_return);
  }
  for (double r : summary.final_eval_returns) summary.final_eval_return_mean += r;
  if (!summary.final_eval_returns.empty())
    summary.final_eval_return_mean /= static_cast<double>(summary.final_eval_returns.size());
  summary.run_dir = out_dir;

  save_checkpoint(out_dir / "checkpoint_final.bin");
  {
    std::ofstream out(out_dir / "summary.json");
    Json j{{"mode", summary.mode},
           {"seed", summary.seed},
           {"profile", cfg.profile},
           {"config_hash", chash},
           {"total_steps", summary.total_steps},
           {"episodes", summary.episodes},
           {"accum_first_violations", summary.accum_first_violations},
           {"violation_steps_total", summary.violation_steps_total},
           {"final_eval_returns", summary.final_eval_returns},
           {"final_eval_return_mean", summary.final_eval_return_mean}};
    out << j.dump(2) << '\n';
  }
  return summary;
}

// Deterministic multi-episode evaluation of a stored checkpoint, with
// per-step traces and per-section force/speed aggregates.
struct EvalReport {
  std::vector<double> returns;
  std::vector<int> wipes;
  double mean_return = 0.0;
  double mean_mrr_dev = 0.0;
  // medians per workpiece section
  std::vector<double> section_force_median;
  std::vector<double> section_speed_median;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// type-7 quantile (linear interpolation), q in [0,1]
inline double quantile_of(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * (static_cast<double>(v.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

inline EvalReport eval_run(const RunConfig& cfg, TrainMode mode,
                           const fs::path& checkpoint_path, int episodes,
                           bool deterministic, const fs::path& out_dir) {
  cfg.validate();
  if (!deterministic)
    diag::warn("stochastic evaluation requested; traces will not be reproducible");
  fs::create_directories(out_dir);
  World world(cfg);
  SacTrainer trainer = make_trainer(cfg, cfg.seed);
  const Checkpoint ck = Checkpoint::load(checkpoint_path);
  if (static_cast<std::uint64_t>(ck.i64_at("meta/config_hash")) != config_hash(cfg))
    throw ConfigError("checkpoint/config mismatch");
  unpack_trainer(ck, trainer);

  JsonlWriter trace_log(out_dir / "eval_trace.jsonl");
  EvalReport report;
  const int sections = cfg.tune.sections;
  const double y_lo = world.scene.path.y_min();
  const double y_hi = world.scene.path.y_max();
  std::vector<std::vector<double>> sec_force(sections), sec_speed(sections);
  double mrr_dev = 0.0;
  long mrr_n = 0;

  for (int k = 0; k < episodes; ++k) {
    std::vector<EvalTraceRow> trace;
    const EpisodeResult er =
        agent_eval_episode(trainer, world, mode, cfg.cheq,
                           derive_seed(cfg.seed, "cmd-eval", k), &trace);
    report.returns.push_back(er.episode_return);
    report.wipes.push_back(er.wipes);
    mrr_dev += er.mean_mrr_dev * er.length;
    mrr_n += er.length;
    for (const auto& row : trace) {
      trace_log.write({{"episode", k},
                       {"t", row.t},
                       {"y", row.y},
                       {"force", row.force},
                       {"speed", row.speed},
                       {"lambda", row.lambda},
                       {"k_y", row.k_y},
                       {"k_z", row.k_z},
                       {"zeta", row.zeta},
                       {"mrr", row.mrr}});
      int sct = static_cast<int>((row.y - y_lo) / (y_hi - y_lo) * sections);
      sct = std::clamp(sct, 0, sections - 1);
      sec_force[sct].push_back(row.force);
      sec_speed[sct].push_back(row.speed);
    }
  }
  for (double r : report.returns) report.mean_return += r;
  if (!report.returns.empty()) report.mean_return /= static_cast<double>(report.returns.size());
  report.mean_mrr_dev = mrr_n > 0 ? mrr_dev / static_cast<double>(mrr_n) : 0.0;
  for (int s = 0; s < sections; ++s) {
    report.section_force_median.push_back(median_of(sec_force[s]));
    report.section_speed_median.push_back(median_of(sec_speed[s]));
  }

  std::ofstream out(out_dir / "eval_report.json");
  Json j{{"episodes", episodes},
         {"deterministic", deterministic},
         {"returns", report.returns},
         {"wipes", report.wipes},
         {"mean_return", report.mean_return},
         {"mean_mrr_dev", report.mean_mrr_dev},
         {"target_mrr",
          cfg.env.mrr_coefficient * cfg.env.force_target * cfg.env.speed_target},
         {"section_force_median", report.section_force_median},
         {"section_speed_median", report.section_speed_median}};
  out << j.dump(2) << '\n';
  return report;
}

// Gain tuning driver: evaluates candidates with full nominal episodes.
struct TuneOutput {
  SearchResult fixed;          // fixed mode
  SectionwiseResult sections;  // section-wise mode
  bool sectionwise = false;
};

inline EpisodeStats evaluate_gain_candidate(const World& world, PolishEnv& env,
                                            const ImpedanceGains& gains,
                                            const GainProfile* profile,
                                            std::uint64_t seed) {
  World w = world;  // cheap: shares nothing mutable but copies configs
  w.nominal.gains = gains;
  if (profile) {
    w.profile = *profile;
    w.has_profile = true;
  }
  return nominal_episode(w, env, seed).stats;
}

inline TuneOutput tune_run(const RunConfig& cfg, bool sectionwise, int budget,
                           const fs::path& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);
  World world(cfg);
  PolishEnv env = world.make_env(true);
  JsonlWriter history(out_dir / "tune_history.jsonl");

  TuneOutput out;
  out.sectionwise = sectionwise;
  long row = 0;
  const auto log_record = [&](const char* stage, const GainCandidate& c,
                              const SearchRecord& rec) {
    history.write({{"row", row++},
                   {"stage", stage},
                   {"k_y", c.k_y},
                   {"k_z", c.k_z},
                   {"zeta", c.zeta},
                   {"score", rec.score},
                   {"wipes", rec.stats.wipes},
                   {"contact_steps", rec.stats.contact_steps},
                   {"total_steps", rec.stats.total_steps},
                   {"mean_force_dev", rec.stats.mean_force_dev},
                   {"mean_speed_dev", rec.stats.mean_speed_dev},
                   {"return", rec.stats.episode_return}});
  };

  if (!sectionwise) {
    long counter = 0;
    const GainEvaluator eval = [&](const GainCandidate& c) {
      return evaluate_gain_candidate(world, env, c.to_gains(cfg.search), nullptr,
                                     derive_seed(cfg.seed, "tune-fixed", counter++));
    };
    const GainCandidate start{
        std::clamp(cfg.nominal.gains.stiffness[1], cfg.search.ky_lo, cfg.search.ky_hi),
        std::clamp(cfg.nominal.gains.stiffness[2], cfg.search.kz_lo, cfg.search.kz_hi),
        std::clamp(cfg.nominal.gains.damping_factor, cfg.search.zeta_lo,
                   cfg.search.zeta_hi)};
    out.fixed = search_gains(cfg.search, budget, eval, derive_seed(cfg.seed, "tune-search"),
                             cfg.tune.weights, start);
    for (const auto& rec : out.fixed.history) log_record("fixed", rec.candidate, rec);

    std::ofstream gains_out(out_dir / "gains.json");
    Json j{{"mode", "fixed"},
           {"k_x", cfg.search.k_x},
           {"k_y", out.fixed.best.k_y},
           {"k_z", out.fixed.best.k_z},
           {"k_rot", cfg.search.k_rot},
           {"zeta", out.fixed.best.zeta},
           {"score", out.fixed.best_score}};
    gains_out << j.dump(2) << '\n';
  } else {
    const ImpedanceGains base = cfg.nominal.gains;
    const GainCandidate defaults{base.stiffness[1], base.stiffness[2],
                                 base.damping_factor};
    long counter = 0;
    const SectionEvaluator eval = [&](const GainProfile& p) {
      return evaluate_gain_candidate(world, env, base, &p,
                                     derive_seed(cfg.seed, "tune-sections", counter++));
    };
    out.sections = sectionwise_tune(cfg.search, cfg.tune.sections,
                                    world.scene.path.y_min(), world.scene.path.y_max(),
                                    defaults, budget, eval,
                                    derive_seed(cfg.seed, "tune-search"),
                                    cfg.tune.weights, &base);
    for (std::size_t s = 0; s < out.sections.per_section.size(); ++s) {
      const std::string stage = "section" + std::to_string(s + 1);
      for (const auto& rec : out.sections.per_section[s].history)
        log_record(stage.c_str(), rec.candidate, rec);
    }
    std::ofstream profile_out(out_dir / "gain_profile.json");
    Json rows = Json::array();
    for (const auto& r : out.sections.profile.rows)
      rows.push_back({{"y_lo", r.y_lo},
                      {"y_hi", r.y_hi},
                      {"k_y", r.k_y},
                      {"k_z", r.k_z},
                      {"zeta", r.zeta}});
    Json j{{"mode", "section-wise"},
           {"k_x", cfg.search.k_x},
           {"k_rot", cfg.search.k_rot},
           {"sections", rows}};
    profile_out << j.dump(2) << '\n';
  }
  return out;
}

inline GainProfile load_gain_profile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open gain profile: " + path.string());
  Json j;
  in >> j;
  GainProfile p;
  const double kx = j.at("k_x").get<double>();
  const double krot = j.at("k_rot").get<double>();
  p.base = make_gains(kx, 0, 0, krot, krot, krot, 1.0);
  for (const auto& row : j.at("sections")) {
    GainProfile::Row r;
    r.y_lo = row.at("y_lo").get<double>();
    r.y_hi = row.at("y_hi").get<double>();
    r.k_y = row.at("k_y").get<double>();
    r.k_z = row.at("k_z").get<double>();
    r.zeta = row.at("zeta").get<double>();
    p.rows.push_back(r);
  }
  p.validate();
  return p;
}

// Aligned comparison of runs: return / accumulated first-violations /
// y-coverage against the environment-step axis, grouped by mode, with
// per-seed values and median + 95% quantile columns.
inline void compare_runs(const std::vector<fs::path>& run_dirs, const fs::path& out_csv,
                         long grid_step = 1000) {
  if (run_dirs.size() < 2) throw ConfigError("compare needs at least 2 runs");
  struct RunData {
    std::string mode;
    std::uint64_t seed = 0;
    std::vector<long> end_step;
    std::vector<double> ret, coverage;
    std::vector<long> accum_violations;
    long max_step = 0;
  };
  std::vector<RunData> runs;
  for (const auto& dir : run_dirs) {
    RunData r;
    std::ifstream sin(dir / "summary.json");
    if (!sin) throw ConfigError("run has no summary.json: " + dir.string());
    Json s;
    sin >> s;
    r.mode = s.at("mode").get<std::string>();
    r.seed = s.at("seed").get<std::uint64_t>();
    for (const auto& rec : read_jsonl(dir / "episodes.jsonl")) {
      r.end_step.push_back(rec.at("end_step").get<long>());
      r.ret.push_back(rec.at("return").get<double>());
      r.coverage.push_back(rec.at("coverage").get<double>());
      r.accum_violations.push_back(rec.at("accum_first_violations").get<long>());
    }
    if (r.end_step.empty()) throw ConfigError("run has no episodes: " + dir.string());
    r.max_step = r.end_step.back();
    runs.push_back(std::move(r));
  }

  long common_max = runs.front().max_step;
  for (const auto& r : runs) common_max = std::min(common_max, r.max_step);
  std::vector<long> grid;
  for (long g = grid_step; g <= common_max; g += grid_step) grid.push_back(g);
  if (grid.empty()) grid.push_back(common_max);

  // value of a metric at a grid point: last episode value at or before it
  const auto series_at = [](const RunData& r, const std::vector<double>& values,
                            long step) {
    double last = values.front();
    for (std::size_t i = 0; i < r.end_step.size(); ++i) {
      if (r.end_step[i] > step) break;
      last = values[i];
    }
    return last;
  };

  std::map<std::string, std::vector<const RunData*>> groups;
  for (const auto& r : runs) groups[r.mode].push_back(&r);

  if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
  std::ofstream out(out_csv);
  out << "metric,mode,step,n,median,q025,q975,spread,values\n";
  const char* metrics[] = {"return", "accum_failures", "coverage"};
  for (const char* metric : metrics) {
    for (const auto& [mode, members] : groups) {
      for (long g : grid) {
        std::vector<double> vals;
        for (const RunData* r : members) {
          if (std::string(metric) == "return")
            vals.push_back(series_at(*r, r->ret, g));
          else if (std::string(metric) == "coverage")
            vals.push_back(series_at(*r, r->coverage, g));
          else {
            std::vector<double> av(r->accum_violations.begin(), r->accum_violations.end());
            vals.push_back(series_at(*r, av, g));
          }
        }
        const double med = median_of(vals);
        const double q025 = quantile_of(vals, 0.025);
        const double q975 = quantile_of(vals, 0.975);
        const double spread =
            *std::max_element(vals.begin(), vals.end()) -
            *std::min_element(vals.begin(), vals.end());
        out << metric << ',' << mode << ',' << g << ',' << vals.size() << ',' << med
            << ',' << q025 << ',' << q975 << ',' << spread << ',';
        for (std::size_t i = 0; i < vals.size(); ++i) {
          if (i) out << '|';
          out << vals[i];
        }
        out << '\n';
      }
    }
  }
}

}  // namespace polish
