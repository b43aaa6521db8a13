#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "polish/nn.hpp"
#include "polish/nominal.hpp"
#include "polish/rng.hpp"

namespace polish {

// Box action space with an affine map between physical actions and the
// normalized [-1, 1] coordinates the networks see.
struct ActionSpace {
  VectorXd lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }

  void validate() const {
    if (lo.size() != hi.size() || lo.size() == 0)
      throw ConfigError("action space bounds mismatch");
    for (int i = 0; i < lo.size(); ++i)
      if (!(lo[i] < hi[i])) throw ConfigError("action space bounds not ordered");
  }

  VectorXd normalize(const VectorXd& physical) const {
    return (2.0 * (physical - lo).array() / (hi - lo).array() - 1.0).matrix();
  }

  VectorXd denormalize(const VectorXd& normalized) const {
    return (lo.array() + (normalized.array() + 1.0) * 0.5 * (hi - lo).array()).matrix();
  }

  // log |da_physical / da_normalized| summed over dims
  double log_scale() const {
    return ((hi - lo).array() * 0.5).log().sum();
  }

  // Action bounds of the polishing task: pose offsets, stiffness diagonal,
  // damping factor. k_y, k_z and zeta spans follow the gain search space.
  static ActionSpace polishing() {
    ActionSpace s;
    s.lo.resize(13);
    s.hi.resize(13);
    s.lo << -0.03, -0.03, -0.03, -0.2, -0.2, -0.2, 100, 50, 30, 100, 100, 100, 0.8;
    s.hi << 0.03, 0.03, 0.03, 0.2, 0.2, 0.2, 800, 200, 130, 800, 800, 800, 1.2;
    return s;
  }
};

struct SacConfig {
  int obs_dim = 47;
  int action_dim = 13;
  std::vector<int> hidden = {256, 256};
  double lr = 3e-4;
  double gamma = 0.99;
  double polyak_xi = 0.005;
  int batch_size = 256;
  int utd = 1;
  int ensemble_size = 5;
  double alpha_init = 0.2;
  bool alpha_autotune = true;
  double target_entropy = -13.0;  // -dim(action)
  long random_steps = 15000;
  std::size_t buffer_capacity = 1000000;
  double log_std_min = -20.0;
  double log_std_max = 2.0;
  double actor_final_scale = 1e-2;
  VectorXd obs_scale;  // per-slot multiplier for net inputs; empty = ones

  void validate() const {
    if (ensemble_size < 2) throw ConfigError("critic ensemble needs E >= 2");
    if (batch_size < 1 || utd < 1) throw ConfigError("batch size and UTD must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must be in (0,1)");
    if (alpha_init <= 0.0) throw ConfigError("alpha must be > 0");
    if (obs_scale.size() != 0 && obs_scale.size() != obs_dim)
      throw ConfigError("obs_scale length mismatch");
  }

  std::vector<int> critic_sizes() const {
    std::vector<int> s{obs_dim + action_dim};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(1);
    return s;
  }

  std::vector<int> actor_sizes() const {
    std::vector<int> s{obs_dim};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(2 * action_dim);
    return s;
  }
};

// Replay record. The stored action is the RL action, never the blended one.
struct Transition {
  Eigen::VectorXf state;       // includes the weight slot
  Eigen::VectorXf rl_action;   // physical units
  float reward = 0.0f;
  Eigen::VectorXf next_state;  // includes the next weight slot
  bool terminated = false;
  bool truncated = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1000000) : capacity_(capacity) {}

  void add(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
    ++total_added_;
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  long total_added() const { return total_added_; }
  const Transition& operator[](std::size_t i) const { return data_[i]; }

  int sample_index(Rng& rng) const {
    return rng.uniform_int(0, static_cast<int>(data_.size()) - 1);
  }

  const std::vector<Transition>& raw() const { return data_; }
  std::vector<Transition>& raw_mutable() { return data_; }
  void restore_cursor(std::size_t next, long total) {
    next_ = next;
    total_added_ = total;
  }
  std::size_t cursor() const { return next_; }

 private:
  std::size_t capacity_;
  std::vector<Transition> data_;
  std::size_t next_ = 0;
  long total_added_ = 0;
};

struct ActorSampleResult {
  VectorXd action_physical;
  VectorXd action_normalized;
  double log_prob = 0.0;
};

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  double alpha_loss = 0.0;
  double entropy = 0.0;  // -mean logp of the fresh samples
  bool skipped = false;
};

// Soft actor-critic with a critic ensemble over (state, action, weight); the
// weight slot travels inside the state vector.
class SacTrainer {
 public:
  using Mf = Mlp<float>;
  using Mat = Mf::Matrix;

  SacTrainer(SacConfig cfg, ActionSpace space, std::uint64_t seed)
      : cfg_(cfg), space_(std::move(space)), buffer_(cfg.buffer_capacity) {
    cfg_.validate();
    space_.validate();
    if (space_.dim() != cfg_.action_dim) throw ConfigError("action space dim mismatch");
    if (cfg_.obs_scale.size() == 0) cfg_.obs_scale = VectorXd::Ones(cfg_.obs_dim);

    Rng init = derive_rng(seed, "sac-init");
    actor_ = Mf::random(cfg_.actor_sizes(), init, cfg_.actor_final_scale);
    for (int e = 0; e < cfg_.ensemble_size; ++e)
      critics_.push_back(Mf::random(cfg_.critic_sizes(), init));
    targets_ = critics_;  // targets start as copies

    actor_opt_ = Adam<float>(actor_, cfg_.lr);
    for (auto& c : critics_) critic_opts_.emplace_back(c, cfg_.lr);
    log_alpha_ = std::log(cfg_.alpha_init);
    alpha_opt_ = AdamScalar(cfg_.lr);
    update_rng_ = derive_rng(seed, "sac-update");
    action_rng_ = derive_rng(seed, "sac-action");

    critic_caches_.resize(cfg_.ensemble_size);
    critic_grads_.resize(cfg_.ensemble_size);
    target_caches_.resize(2);
    fresh_caches_.resize(2);
  }

  const SacConfig& config() const { return cfg_; }
  const ActionSpace& space() const { return space_; }
  ReplayBuffer& buffer() { return buffer_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  double alpha() const { return std::exp(log_alpha_); }
  long env_steps() const { return env_steps_; }
  long updates_done() const { return updates_done_; }
  bool in_random_phase() const { return env_steps_ < cfg_.random_steps; }

  Mf& actor() { return actor_; }
  std::vector<Mf>& critics() { return critics_; }
  std::vector<Mf>& targets() { return targets_; }
  const std::vector<Mf>& critics() const { return critics_; }
  Adam<float>& actor_opt() { return actor_opt_; }
  std::vector<Adam<float>>& critic_opts() { return critic_opts_; }
  double& log_alpha() { return log_alpha_; }
  AdamScalar& alpha_opt() { return alpha_opt_; }
  Rng& update_rng() { return update_rng_; }
  Rng& action_rng() { return action_rng_; }
  void set_counters(long env_steps, long updates) {
    env_steps_ = env_steps;
    updates_done_ = updates;
  }

  // Uniform random action in bounds (the initial exploration phase).
  VectorXd random_action() {
    VectorXd a(space_.dim());
    for (int i = 0; i < a.size(); ++i) a[i] = action_rng_.uniform(space_.lo[i], space_.hi[i]);
    return a;
  }

  // Reparameterized tanh-Gaussian sample mapped to bounds; deterministic mode
  // returns the squashed mean.
  ActorSampleResult sample_action(const VectorXd& obs, bool deterministic = false) {
    return sample_action(obs, deterministic, action_rng_);
  }

  ActorSampleResult sample_action(const VectorXd& obs, bool deterministic, Rng& rng) {
    if (!obs.allFinite()) throw DomainError("actor state must be finite");
    const Eigen::VectorXf in = scale_obs(obs);
    const Mf::Vector out = actor_.forward(Mf::Vector(in));
    const int d = cfg_.action_dim;
    ActorSampleResult r;
    r.action_normalized.resize(d);
    double logp = 0.0;
    for (int i = 0; i < d; ++i) {
      const double mu = out[i];
      const double ls = std::clamp<double>(out[d + i], cfg_.log_std_min, cfg_.log_std_max);
      const double sigma = std::exp(ls);
      const double eps = deterministic ? 0.0 : rng.normal();
      const double u = mu + sigma * eps;
      const double a = std::tanh(u);
      r.action_normalized[i] = a;
      logp += -ls - 0.5 * eps * eps - 0.5 * std::log(2.0 * kPi);
      logp -= std::log(1.0 - a * a + 1e-6);
    }
    logp -= space_.log_scale();
    r.log_prob = logp;
    r.action_physical = space_.denormalize(r.action_normalized);
    return r;
  }

  void observe(Transition t) {
    buffer_.add(std::move(t));
    ++env_steps_;
  }

  // Ensemble dispersion at (state, rl_action): population standard deviation
  // of the E online critic predictions.
  double ensemble_uncertainty(const VectorXd& obs, const VectorXd& action_physical) {
    if (cfg_.ensemble_size < 2) throw ConfigError("uncertainty needs E >= 2");
    Eigen::VectorXf z(cfg_.obs_dim + cfg_.action_dim);
    z.head(cfg_.obs_dim) = scale_obs(obs);
    z.tail(cfg_.action_dim) = space_.normalize(action_physical).cast<float>();
    double mean = 0.0;
    std::vector<double> q(critics_.size());
    const Mf::Vector zv = z;
    for (std::size_t e = 0; e < critics_.size(); ++e) {
      q[e] = critics_[e].forward(zv)[0];
      mean += q[e];
    }
    mean /= static_cast<double>(q.size());
    double var = 0.0;
    for (double v : q) var += (v - mean) * (v - mean);
    var /= static_cast<double>(q.size());
    return std::sqrt(var);
  }

  bool can_update() const {
    return !in_random_phase() &&
           buffer_.size() >= static_cast<std::size_t>(cfg_.batch_size);
  }

  // UTD gradient rounds per environment step.
  std::vector<UpdateStats> maybe_update() {
    std::vector<UpdateStats> out;
    if (!can_update()) return out;
    for (int i = 0; i < cfg_.utd; ++i) out.push_back(update());
    return out;
  }

  UpdateStats update() {
    if (buffer_.size() < static_cast<std::size_t>(cfg_.batch_size))
      throw UsageError("update requires a full batch in the replay buffer");
    const int B = cfg_.batch_size;
    const int D = cfg_.obs_dim;
    const int A = cfg_.action_dim;
    UpdateStats stats;

    // --- batch assembly (rng draw 1: indices) ---
    s_.resize(D, B);
    sa_.resize(D + A, B);
    s2_.resize(D, B);
    r_.resize(B);
    notdone_.resize(B);
    for (int b = 0; b < B; ++b) {
      const Transition& t = buffer_[buffer_.sample_index(update_rng_)];
      for (int i = 0; i < D; ++i) {
        const float si = t.state[i] * static_cast<float>(cfg_.obs_scale[i]);
        s_(i, b) = si;
        sa_(i, b) = si;
        s2_(i, b) = t.next_state[i] * static_cast<float>(cfg_.obs_scale[i]);
      }
      const VectorXd an = space_.normalize(t.rl_action.cast<double>());
      for (int i = 0; i < A; ++i) sa_(D + i, b) = static_cast<float>(an[i]);
      r_[b] = t.reward;
      notdone_[b] = t.terminated ? 0.0f : 1.0f;  // truncation still bootstraps
    }

    // --- critic targets (rng draws 2, 3: target pair, next-action noise) ---
    int t0 = update_rng_.uniform_int(0, cfg_.ensemble_size - 1);
    int t1 = update_rng_.uniform_int(0, cfg_.ensemble_size - 2);
    if (t1 >= t0) ++t1;
    ActorBatch next = actor_batch(s2_, update_rng_);
    sa2_.resize(D + A, B);
    sa2_.topRows(D) = s2_;
    sa2_.bottomRows(A) = next.a_n;
    const Mat q0 = targets_[t0].forward(sa2_, &target_caches_[0]);
    const Mat q1 = targets_[t1].forward(sa2_, &target_caches_[1]);
    y_.resize(B);
    const float alpha_f = static_cast<float>(alpha());
    for (int b = 0; b < B; ++b) {
      const float qmin = std::min(q0(0, b), q1(0, b));
      y_[b] = r_[b] + static_cast<float>(cfg_.gamma) * notdone_[b] *
                          (qmin - alpha_f * next.logp[b]);
    }

    // --- critic regression: every critic fits the shared target ---
    double critic_loss = 0.0;
    dq_.resize(1, B);
    for (int e = 0; e < cfg_.ensemble_size; ++e) {
      const Mat q = critics_[e].forward(sa_, &critic_caches_[e]);
      double loss = 0.0;
      for (int b = 0; b < B; ++b) {
        const float d = q(0, b) - y_[b];
        loss += d * d;
        dq_(0, b) = 2.0f * d / static_cast<float>(B);
      }
      critic_loss += loss / B;
      critics_[e].backward(critic_caches_[e], dq_, &critic_grads_[e], false);
      if (!critic_opts_[e].update(critics_[e], critic_grads_[e])) stats.skipped = true;
    }
    stats.critic_loss = critic_loss / cfg_.ensemble_size;

    // --- actor ascent on min over two fresh critics (rng draws 4, 5) ---
    int f0 = update_rng_.uniform_int(0, cfg_.ensemble_size - 1);
    int f1 = update_rng_.uniform_int(0, cfg_.ensemble_size - 2);
    if (f1 >= f0) ++f1;
    ActorBatch cur = actor_batch(s_, update_rng_, &actor_cache_);

    san_.resize(D + A, B);
    san_.topRows(D) = s_;
    san_.bottomRows(A) = cur.a_n;
    const Mat qa0 = critics_[f0].forward(san_, &fresh_caches_[0]);
    const Mat qa1 = critics_[f1].forward(san_, &fresh_caches_[1]);

    // route the -d(qmin)/da gradient to the argmin critic per sample
    dq0_.resize(1, B);
    dq1_.resize(1, B);
    double actor_obj = 0.0;
    for (int b = 0; b < B; ++b) {
      const bool first = qa0(0, b) <= qa1(0, b);
      dq0_(0, b) = first ? -1.0f / B : 0.0f;
      dq1_(0, b) = first ? 0.0f : -1.0f / B;
      actor_obj += alpha_f * cur.logp[b] - std::min(qa0(0, b), qa1(0, b));
    }
    stats.actor_loss = actor_obj / B;
    const Mat dz0 = critics_[f0].backward(fresh_caches_[0], dq0_, nullptr, true);
    const Mat dz1 = critics_[f1].backward(fresh_caches_[1], dq1_, nullptr, true);

    dout_.resize(2 * A, B);
    for (int b = 0; b < B; ++b) {
      for (int i = 0; i < A; ++i) {
        const float a = cur.a_n(i, b);
        const float one_m_a2 = 1.0f - a * a;
        // d logp / da from the squash correction -log(1 - a^2 + eta)
        const float dlogp_da = 2.0f * a / (one_m_a2 + 1e-6f);
        float dl_da = dz0(D + i, b) + dz1(D + i, b);  // -qmin path
        float dl_du = (dl_da + alpha_f / B * dlogp_da) * one_m_a2;
        dout_(i, b) = dl_du;  // d/d mu
        // d/d log_std: through u = mu + sigma*eps, plus the direct -ls term
        float dls = dl_du * cur.sigma(i, b) * cur.eps(i, b) - alpha_f / B;
        dout_(A + i, b) = cur.ls_clipped(i, b) ? 0.0f : dls;
      }
    }
    actor_.backward(actor_cache_, dout_, &actor_grads_, false);
    if (!actor_opt_.update(actor_, actor_grads_)) stats.skipped = true;

    // --- temperature ---
    double mean_logp = 0.0;
    for (int b = 0; b < B; ++b) mean_logp += cur.logp[b];
    mean_logp /= B;
    stats.entropy = -mean_logp;
    if (cfg_.alpha_autotune) {
      const double g = -alpha() * (mean_logp + cfg_.target_entropy);
      stats.alpha_loss = g;
      alpha_opt_.update(log_alpha_, g);
    }
    stats.alpha = alpha();

    // --- polyak averaging of all targets ---
    for (int e = 0; e < cfg_.ensemble_size; ++e)
      polyak_update(targets_[e], critics_[e], static_cast<float>(cfg_.polyak_xi));

    ++updates_done_;
    if (stats.skipped) diag::warn("sac update had a skipped optimizer step");
    return stats;
  }

  Eigen::VectorXf scale_obs(const VectorXd& obs) const {
    if (obs.size() != cfg_.obs_dim) throw ConfigError("observation size mismatch");
    return (obs.array() * cfg_.obs_scale.array()).cast<float>();
  }

 private:
  struct ActorBatch {
    Mat a_n;          // tanh(u), the normalized action
    Mat sigma, eps;   // reparameterization pieces
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> ls_clipped;
    Eigen::VectorXf logp;
  };

  // Batched actor sampling; draws A x B normals from rng in column order.
  ActorBatch actor_batch(const Mat& s_scaled, Rng& rng, Mf::Cache* cache = nullptr) {
    const int B = static_cast<int>(s_scaled.cols());
    const int A = cfg_.action_dim;
    const Mat out = cache ? actor_.forward(s_scaled, cache) : actor_.forward(s_scaled);
    ActorBatch r;
    r.a_n.resize(A, B);
    r.sigma.resize(A, B);
    r.eps.resize(A, B);
    r.ls_clipped.resize(A, B);
    r.logp.setZero(B);
    const float log_scale = static_cast<float>(space_.log_scale());
    for (int b = 0; b < B; ++b) {
      float logp = 0.0f;
      for (int i = 0; i < A; ++i) {
        const float mu = out(i, b);
        const float ls_raw = out(A + i, b);
        const float ls = std::clamp(ls_raw, static_cast<float>(cfg_.log_std_min),
                                    static_cast<float>(cfg_.log_std_max));
        r.ls_clipped(i, b) = ls != ls_raw;
        const float sigma = std::exp(ls);
        const float eps = static_cast<float>(rng.normal());
        const float u = mu + sigma * eps;
        const float a = std::tanh(u);
        r.a_n(i, b) = a;
        r.sigma(i, b) = sigma;
        r.eps(i, b) = eps;
        logp += -ls - 0.5f * eps * eps - 0.5f * static_cast<float>(std::log(2.0 * kPi));
        logp -= std::log(1.0f - a * a + 1e-6f);
      }
      r.logp[b] = logp - log_scale;
    }
    return r;
  }

  SacConfig cfg_;
  ActionSpace space_;
  ReplayBuffer buffer_;
  Mf actor_;
  std::vector<Mf> critics_, targets_;
  Adam<float> actor_opt_;
  std::vector<Adam<float>> critic_opts_;
  double log_alpha_ = 0.0;
  AdamScalar alpha_opt_;
  Rng update_rng_, action_rng_;
  long env_steps_ = 0;
  long updates_done_ = 0;

  // persistent workspaces so the update loop stays allocation-free
  Mat s_, sa_, s2_, sa2_, san_, dq_, dq0_, dq1_, dout_;
  Eigen::VectorXf r_, notdone_, y_;
  std::vector<Mf::Cache> critic_caches_, target_caches_, fresh_caches_;
  std::vector<Mf::Grads> critic_grads_;
  Mf::Cache actor_cache_;
  Mf::Grads actor_grads_;
};

}  // namespace polish
