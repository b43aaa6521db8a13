#pragma once

#include <optional>
#include <vector>

#include "polish/env.hpp"
#include "polish/nominal.hpp"
#include "polish/sac.hpp"

namespace polish {

struct CheqConfig {
  double lambda_min = 0.2;
  double lambda_max = 1.0;
  double u_min = 0.02;
  double u_max = 0.2;
  int window = 1;                // uncertainty smoothing length
  double random_lambda_lo = 0.2; // weight range during the random phase
  double random_lambda_hi = 0.3;
  double lambda_init = 0.2;      // weight slot at episode start

  void validate() const {
    if (!(0.0 <= lambda_min && lambda_min <= lambda_max && lambda_max <= 1.0))
      throw ConfigError("need 0 <= lambda_min <= lambda_max <= 1");
    if (!(0.0 < u_min && u_min < u_max))
      throw ConfigError("need 0 < u_min < u_max");
    if (window < 1) throw ConfigError("smoothing window must be >= 1");
    if (!(random_lambda_lo <= random_lambda_hi))
      throw ConfigError("random-phase lambda range is inverted");
  }
};

// Ring buffer of the last W raw uncertainties; cleared at episode resets.
class UncertaintyWindow {
 public:
  explicit UncertaintyWindow(int window = 1) : window_(window) {
    if (window < 1) throw ConfigError("smoothing window must be >= 1");
  }

  double push(double u_raw) {
    if (static_cast<int>(values_.size()) < window_) {
      values_.push_back(u_raw);
    } else {
      values_[next_] = u_raw;
      next_ = (next_ + 1) % window_;
    }
    double sum = 0.0;
    for (double v : values_) sum += v;
    return sum / static_cast<double>(values_.size());
  }

  void clear() {
    values_.clear();
    next_ = 0;
  }

  int window() const { return window_; }
  const std::vector<double>& values() const { return values_; }

 private:
  int window_;
  std::vector<double> values_;
  std::size_t next_ = 0;
};

// Clipped linear map from ensemble uncertainty to the RL weight: confident
// (low u) means full RL authority, uncertain means the prior takes over.
inline double lambda_from_uncertainty(double u, const CheqConfig& cfg) {
  if (u <= cfg.u_min) return cfg.lambda_max;
  if (u >= cfg.u_max) return cfg.lambda_min;
  return cfg.lambda_max -
         (u - cfg.u_min) / (cfg.u_max - cfg.u_min) * (cfg.lambda_max - cfg.lambda_min);
}

// Convex combination of the 13-dim action vectors. Orientation offsets are
// rotation vectors, so the elementwise blend stays well-defined.
inline HybridAction blend(const HybridAction& a_prior, const HybridAction& a_rl,
                          double lambda) {
  if (lambda < 0.0 || lambda > 1.0) {
    diag::warn("blend weight outside [0,1]; clamped");
    lambda = clamp01(lambda);
  }
  if (lambda == 0.0) return a_prior;
  if (lambda == 1.0) return a_rl;
  return HybridAction::from_vector((1.0 - lambda) * a_prior.to_vector() +
                                   lambda * a_rl.to_vector());
}

struct PriorController {
  const PathModel* path = nullptr;
  const WorkpieceModel* workpiece = nullptr;
  NominalConfig config;
  const GainProfile* profile = nullptr;

  HybridAction action(const Pose& pose) const {
    return nominal_action(*path, *workpiece, pose, config, profile);
  }
};

struct CheqStepResult {
  StepOutcome outcome;
  HybridAction executed;  // the blended action handed to the environment
  double u_raw = 0.0;
  double u_smooth = 0.0;
  double lambda = 0.0;  // weight used for the blend and written into s'
  bool random_phase = false;
};

// One hybrid rollout step: sample the RL action in the lambda-contextualized
// state, refresh the weight from smoothed ensemble uncertainty, blend with
// the prior, step the environment, and store the RL transition.
//
// `obs` must hold the current observation with the in-effect weight in its
// last slot; it is replaced by the next observation. `forced_lambda`
// overrides the weight (used by the prior-equivalence check); transitions
// are still stored against the forced weight.
inline CheqStepResult cheq_rollout_step(SacTrainer& agent, PolishEnv& env,
                                        const PriorController& prior,
                                        const CheqConfig& cfg,
                                        UncertaintyWindow& window, VectorXd& obs,
                                        bool store = true,
                                        std::optional<double> forced_lambda = {},
                                        bool deterministic = false) {
  CheqStepResult r;
  r.random_phase = agent.in_random_phase();

  VectorXd a_rl;
  if (r.random_phase && !deterministic) {
    a_rl = agent.random_action();
  } else {
    a_rl = agent.sample_action(obs, deterministic).action_physical;
  }

  r.u_raw = agent.ensemble_uncertainty(obs, a_rl);
  r.u_smooth = window.push(r.u_raw);
  if (forced_lambda) {
    r.lambda = *forced_lambda;
  } else if (r.random_phase && !deterministic) {
    r.lambda = agent.action_rng().uniform(cfg.random_lambda_lo, cfg.random_lambda_hi);
  } else {
    r.lambda = lambda_from_uncertainty(r.u_smooth, cfg);
  }

  const HybridAction a_prior = prior.action(env.tool_state().pose);
  const HybridAction a_ref = blend(a_prior, HybridAction::from_vector(a_rl), r.lambda);
  r.executed = a_ref;
  r.outcome = env.step(a_ref, r.lambda);

  if (store) {
    Transition t;
    t.state = obs.cast<float>();
    t.rl_action = a_rl.cast<float>();
    t.reward = static_cast<float>(r.outcome.reward);
    t.next_state = r.outcome.observation.cast<float>();
    t.terminated = r.outcome.terminated;
    t.truncated = r.outcome.truncated;
    agent.observe(std::move(t));
  }
  obs = r.outcome.observation;
  return r;
}

}  // namespace polish
