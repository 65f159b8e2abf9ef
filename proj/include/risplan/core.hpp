#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace risplan {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using cdouble = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CRowVec = Eigen::RowVectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;

enum class ErrorCode {
  invalid_input,
  infeasible_coverage,
  no_path,
  degenerate_link,
  unobservable_path,
  infeasible_power,
  unreachable_targets,
  unsupported_delay,
  estimation_failure,
  io_failure,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::infeasible_coverage: return "infeasible-coverage";
    case ErrorCode::no_path: return "no-path";
    case ErrorCode::degenerate_link: return "degenerate-link";
    case ErrorCode::unobservable_path: return "unobservable-path";
    case ErrorCode::infeasible_power: return "infeasible-power";
    case ErrorCode::unreachable_targets: return "unreachable-targets";
    case ErrorCode::unsupported_delay: return "unsupported-delay";
    case ErrorCode::estimation_failure: return "estimation-failure";
    case ErrorCode::io_failure: return "io-failure";
  }
  return "unknown";
}

/// Library error. `code()` is stable and machine readable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCode::invalid_input, message);
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double linear) { return 10.0 * std::log10(linear); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline double wavelength_of(double carrier_hz) { return kSpeedOfLight / carrier_hz; }
inline double wavenumber_of(double wavelength) { return kTwoPi / wavelength; }

/// Wraps an angle into [0, 2π).
inline double wrap_phase(double phase) {
  double wrapped = std::fmod(phase, kTwoPi);
  if (wrapped < 0.0) wrapped += kTwoPi;
  if (wrapped >= kTwoPi) wrapped = 0.0;
  return wrapped;
}

/// Shortest distance between two angles on the circle.
inline double circular_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), kTwoPi);
  return d > kPi ? kTwoPi - d : d;
}

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace risplan
