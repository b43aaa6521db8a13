#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "polish/common.hpp"
#include "polish/nn.hpp"
#include "polish/sac.hpp"

namespace polish {

// Single-file container of named arrays. Payloads are raw little-endian
// bytes, so a round trip restores bit-identical values.
class Checkpoint {
 public:
  static constexpr char kMagic[8] = {'P', 'B', 'C', 'K', 'P', 'T', '0', '1'};

  std::map<std::string, std::vector<float>> f32;
  std::map<std::string, std::vector<double>> f64;
  std::map<std::string, std::vector<std::int64_t>> i64;
  std::map<std::string, std::string> text;

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    for (const auto& [name, v] : f32) write_record(out, name, 0, v.data(), v.size() * 4);
    for (const auto& [name, v] : f64) write_record(out, name, 1, v.data(), v.size() * 8);
    for (const auto& [name, v] : i64) write_record(out, name, 2, v.data(), v.size() * 8);
    for (const auto& [name, v] : text) write_record(out, name, 3, v.data(), v.size());
    if (!out) throw ConfigError("checkpoint write failed: " + path.string());
  }

  static Checkpoint load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
      throw ConfigError("not a checkpoint file: " + path.string());
    Checkpoint c;
    while (true) {
      std::uint32_t name_len = 0;
      in.read(reinterpret_cast<char*>(&name_len), 4);
      if (!in) break;
      std::string name(name_len, '\0');
      in.read(name.data(), name_len);
      std::uint8_t dtype = 0;
      std::uint64_t bytes = 0;
      in.read(reinterpret_cast<char*>(&dtype), 1);
      in.read(reinterpret_cast<char*>(&bytes), 8);
      if (!in) throw ConfigError("truncated checkpoint: " + path.string());
      switch (dtype) {
        case 0: {
          auto& v = c.f32[name];
          v.resize(bytes / 4);
          in.read(reinterpret_cast<char*>(v.data()), bytes);
          break;
        }
        case 1: {
          auto& v = c.f64[name];
          v.resize(bytes / 8);
          in.read(reinterpret_cast<char*>(v.data()), bytes);
          break;
        }
        case 2: {
          auto& v = c.i64[name];
          v.resize(bytes / 8);
          in.read(reinterpret_cast<char*>(v.data()), bytes);
          break;
        }
        case 3: {
          auto& v = c.text[name];
          v.resize(bytes);
          in.read(v.data(), bytes);
          break;
        }
        default:
          throw ConfigError("unknown dtype in checkpoint");
      }
      if (!in) throw ConfigError("truncated checkpoint: " + path.string());
    }
    return c;
  }

  const std::vector<float>& f32_at(const std::string& name) const {
    auto it = f32.find(name);
    if (it == f32.end()) throw ConfigError("checkpoint misses array: " + name);
    return it->second;
  }
  std::int64_t i64_at(const std::string& name) const {
    auto it = i64.find(name);
    if (it == i64.end() || it->second.empty())
      throw ConfigError("checkpoint misses value: " + name);
    return it->second[0];
  }
  double f64_at(const std::string& name) const {
    auto it = f64.find(name);
    if (it == f64.end() || it->second.empty())
      throw ConfigError("checkpoint misses value: " + name);
    return it->second[0];
  }
  const std::string& text_at(const std::string& name) const {
    auto it = text.find(name);
    if (it == text.end()) throw ConfigError("checkpoint misses text: " + name);
    return it->second;
  }

 private:
  static void write_record(std::ofstream& out, const std::string& name,
                           std::uint8_t dtype, const void* data, std::uint64_t bytes) {
    const std::uint32_t name_len = static_cast<std::uint32_t>(name.size());
    out.write(reinterpret_cast<const char*>(&name_len), 4);
    out.write(name.data(), name_len);
    out.write(reinterpret_cast<const char*>(&dtype), 1);
    out.write(reinterpret_cast<const char*>(&bytes), 8);
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  }
};

namespace detail {

template <typename S>
void pack_mlp(Checkpoint& c, const std::string& prefix, const Mlp<S>& net) {
  for (int l = 0; l < net.layers(); ++l) {
    auto& w = c.f32[prefix + "/W" + std::to_string(l)];
    w.assign(net.W[l].data(), net.W[l].data() + net.W[l].size());
    auto& b = c.f32[prefix + "/b" + std::to_string(l)];
    b.assign(net.b[l].data(), net.b[l].data() + net.b[l].size());
  }
}

template <typename S>
void unpack_mlp(const Checkpoint& c, const std::string& prefix, Mlp<S>& net) {
  for (int l = 0; l < net.layers(); ++l) {
    const auto& w = c.f32_at(prefix + "/W" + std::to_string(l));
    if (static_cast<std::int64_t>(w.size()) != net.W[l].size())
      throw ConfigError("checkpoint/architecture mismatch at " + prefix);
    std::memcpy(net.W[l].data(), w.data(), w.size() * 4);
    const auto& b = c.f32_at(prefix + "/b" + std::to_string(l));
    std::memcpy(net.b[l].data(), b.data(), b.size() * 4);
  }
}

template <typename S>
void pack_grads(Checkpoint& c, const std::string& prefix,
                const typename Mlp<S>::Grads& g) {
  for (std::size_t l = 0; l < g.dW.size(); ++l) {
    auto& w = c.f32[prefix + "/mW" + std::to_string(l)];
    w.assign(g.dW[l].data(), g.dW[l].data() + g.dW[l].size());
    auto& b = c.f32[prefix + "/mb" + std::to_string(l)];
    b.assign(g.db[l].data(), g.db[l].data() + g.db[l].size());
  }
}

template <typename S>
void unpack_grads(const Checkpoint& c, const std::string& prefix,
                  typename Mlp<S>::Grads& g) {
  for (std::size_t l = 0; l < g.dW.size(); ++l) {
    const auto& w = c.f32_at(prefix + "/mW" + std::to_string(l));
    std::memcpy(g.dW[l].data(), w.data(), w.size() * 4);
    const auto& b = c.f32_at(prefix + "/mb" + std::to_string(l));
    std::memcpy(g.db[l].data(), b.data(), b.size() * 4);
  }
}

}  // namespace detail

// Serializes the full trainer: parameters, optimizer moments, temperature,
// rng streams, counters, and the replay buffer.
inline void pack_trainer(Checkpoint& c, SacTrainer& t, bool include_buffer = true) {
  detail::pack_mlp(c, "actor", t.actor());
  for (std::size_t e = 0; e < t.critics().size(); ++e) {
    detail::pack_mlp(c, "critic" + std::to_string(e), t.critics()[e]);
    detail::pack_mlp(c, "target" + std::to_string(e), t.targets()[e]);
    detail::pack_grads<float>(c, "adam_critic" + std::to_string(e) + "/m",
                              t.critic_opts()[e].moments_m());
    detail::pack_grads<float>(c, "adam_critic" + std::to_string(e) + "/v",
                              t.critic_opts()[e].moments_v());
    c.i64["adam_critic" + std::to_string(e) + "/step"] = {t.critic_opts()[e].step()};
  }
  detail::pack_grads<float>(c, "adam_actor/m", t.actor_opt().moments_m());
  detail::pack_grads<float>(c, "adam_actor/v", t.actor_opt().moments_v());
  c.i64["adam_actor/step"] = {t.actor_opt().step()};
  c.f64["alpha/log"] = {t.log_alpha()};
  c.f64["alpha/adam"] = {t.alpha_opt().m(), t.alpha_opt().v()};
  c.i64["alpha/step"] = {t.alpha_opt().step()};
  c.text["rng/update"] = t.update_rng().serialize();
  c.text["rng/action"] = t.action_rng().serialize();
  c.i64["counters/env_steps"] = {t.env_steps()};
  c.i64["counters/updates"] = {t.updates_done()};

  if (include_buffer) {
    const auto& buf = t.buffer();
    const std::size_t n = buf.size();
    const int d = t.config().obs_dim;
    const int a = t.config().action_dim;
    auto& states = c.f32["replay/states"];
    auto& actions = c.f32["replay/actions"];
    auto& next_states = c.f32["replay/next_states"];
    auto& rewards = c.f32["replay/rewards"];
    auto& flags = c.i64["replay/flags"];
    states.resize(n * d);
    actions.resize(n * a);
    next_states.resize(n * d);
    rewards.resize(n);
    flags.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::memcpy(states.data() + i * d, buf[i].state.data(), d * 4);
      std::memcpy(actions.data() + i * a, buf[i].rl_action.data(), a * 4);
      std::memcpy(next_states.data() + i * d, buf[i].next_state.data(), d * 4);
      rewards[i] = buf[i].reward;
      flags[i] = (buf[i].terminated ? 1 : 0) | (buf[i].truncated ? 2 : 0);
    }
    c.i64["replay/cursor"] = {static_cast<std::int64_t>(buf.cursor())};
    c.i64["replay/total"] = {buf.total_added()};
  }
}

inline void unpack_trainer(const Checkpoint& c, SacTrainer& t) {
  detail::unpack_mlp(c, "actor", t.actor());
  for (std::size_t e = 0; e < t.critics().size(); ++e) {
    detail::unpack_mlp(c, "critic" + std::to_string(e), t.critics()[e]);
    detail::unpack_mlp(c, "target" + std::to_string(e), t.targets()[e]);
    auto& opt = t.critic_opts()[e];
    opt.moments_m().init_like(t.critics()[e]);
    opt.moments_v().init_like(t.critics()[e]);
    detail::unpack_grads<float>(c, "adam_critic" + std::to_string(e) + "/m",
                                opt.moments_m());
    detail::unpack_grads<float>(c, "adam_critic" + std::to_string(e) + "/v",
                                opt.moments_v());
    opt.set_step(c.i64_at("adam_critic" + std::to_string(e) + "/step"));
  }
  t.actor_opt().moments_m().init_like(t.actor());
  t.actor_opt().moments_v().init_like(t.actor());
  detail::unpack_grads<float>(c, "adam_actor/m", t.actor_opt().moments_m());
  detail::unpack_grads<float>(c, "adam_actor/v", t.actor_opt().moments_v());
  t.actor_opt().set_step(c.i64_at("adam_actor/step"));
  t.log_alpha() = c.f64_at("alpha/log");
  {
    const auto& av = c.f64.at("alpha/adam");
    t.alpha_opt().restore(av[0], av[1], c.i64_at("alpha/step"));
  }
  t.update_rng().deserialize(c.text_at("rng/update"));
  t.action_rng().deserialize(c.text_at("rng/action"));
  t.set_counters(c.i64_at("counters/env_steps"), c.i64_at("counters/updates"));

  if (c.f32.count("replay/states")) {
    const int d = t.config().obs_dim;
    const int a = t.config().action_dim;
    const auto& states = c.f32_at("replay/states");
    const auto& actions = c.f32_at("replay/actions");
    const auto& next_states = c.f32_at("replay/next_states");
    const auto& rewards = c.f32_at("replay/rewards");
    const auto& flags = c.i64.at("replay/flags");
    const std::size_t n = rewards.size();
    auto& raw = t.buffer().raw_mutable();
    raw.clear();
    raw.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      Transition& tr = raw[i];
      tr.state.resize(d);
      tr.rl_action.resize(a);
      tr.next_state.resize(d);
      std::memcpy(tr.state.data(), states.data() + i * d, d * 4);
      std::memcpy(tr.rl_action.data(), actions.data() + i * a, a * 4);
      std::memcpy(tr.next_state.data(), next_states.data() + i * d, d * 4);
      tr.reward = rewards[i];
      tr.terminated = (flags[i] & 1) != 0;
      tr.truncated = (flags[i] & 2) != 0;
    }
    t.buffer().restore_cursor(static_cast<std::size_t>(c.i64_at("replay/cursor")),
                              c.i64_at("replay/total"));
  }
}

}  // namespace polish
