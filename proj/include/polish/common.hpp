#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace polish {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Vector13 = Eigen::Matrix<double, 13, 1>;
using VectorXd = Eigen::VectorXd;
using MatrixXd = Eigen::MatrixXd;

constexpr double kPi = 3.14159265358979323846;

// Bad configuration values or violated construction preconditions.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad runtime values: out-of-domain arguments, degenerate geometry.
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse: stepping a finished episode, backward without a cache.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite state during integration; fatal for the episode.
struct DivergedError : std::runtime_error {
  explicit DivergedError(const std::string& msg) : std::runtime_error(msg) {}
};

// Lightweight warning channel. Warnings never abort; callers that care
// inspect the counter (tests do).
namespace diag {

inline thread_local long warning_count_v = 0;
inline thread_local std::string last_warning_v;

inline void warn(std::string_view msg) {
  ++warning_count_v;
  last_warning_v.assign(msg);
}

inline long warning_count() { return warning_count_v; }
inline const std::string& last_warning() { return last_warning_v; }
inline void reset_warnings() {
  warning_count_v = 0;
  last_warning_v.clear();
}

}  // namespace diag

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace polish
