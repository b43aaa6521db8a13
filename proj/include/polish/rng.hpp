#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "polish/common.hpp"

namespace polish {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Hash a short label into a stream id so components can derive independent
// rng streams from one master seed.
inline std::uint64_t stream_id(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic rng wrapper. Distribution code is hand-rolled so sampled
// sequences depend only on the mt19937_64 stream, not on libstdc++
// distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(splitmix64(seed)) {}

  // [0, 1)
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(gen_() % span);
  }

  // Box-Muller without caching; two uniforms per draw.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::uint64_t raw() { return gen_(); }

  // Independent child stream.
  Rng spawn(std::uint64_t id) const {
    Rng child;
    std::mt19937_64 probe = gen_;  // do not disturb this stream
    child.gen_.seed(splitmix64(splitmix64(id) ^ probe()));
    return child;
  }

  Rng spawn(std::string_view label) const { return spawn(stream_id(label)); }

  std::string serialize() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }

  void deserialize(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
    if (!is) throw DomainError("rng state string is malformed");
  }

 private:
  std::mt19937_64 gen_;
};

// Seed derivation helper: master seed + component label + index.
inline Rng derive_rng(std::uint64_t master, std::string_view label,
                      std::uint64_t index = 0) {
  return Rng(splitmix64(master ^ stream_id(label)) ^ splitmix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

}  // namespace polish
