#pragma once

#include "risplan/core.hpp"

#include <algorithm>

namespace risplan {

/// Uniform planar array in the local y-z plane, boresight along local +x.
struct UpaGeometry {
  int count_y = 1;
  int count_z = 1;
  double spacing = 0.0;
  double wavelength = 0.0;

  static UpaGeometry half_wavelength(int count_y, int count_z, double wavelength) {
    return UpaGeometry{count_y, count_z, wavelength / 2.0, wavelength}.validated();
  }

  static UpaGeometry square(int side, double wavelength) {
    return half_wavelength(side, side, wavelength);
  }

  int size() const { return count_y * count_z; }

  UpaGeometry validated() const {
    require(count_y >= 1 && count_z >= 1, "array counts must be >= 1");
    require(spacing > 0.0 && wavelength > 0.0, "array spacing and wavelength must be > 0");
    return *this;
  }

  /// Local offset of element (iy, iz) from element (0, 0); flat index is iy * count_z + iz.
  Vec3 element_offset(int index) const {
    const int iy = index / count_z;
    const int iz = index % count_z;
    return Vec3(0.0, iy * spacing, iz * spacing);
  }

  /// Local offset of element `index` relative to the array center.
  Vec3 centered_offset(int index) const {
    Vec3 center(0.0, 0.5 * (count_y - 1) * spacing, 0.5 * (count_z - 1) * spacing);
    return element_offset(index) - center;
  }
};

struct Orientation {
  double theta_r = 0.0;
  double psi_r = 0.0;
};

struct OrientationBounds {
  double theta_lo = -kPi / 2;
  double theta_hi = kPi / 2;
  double psi_lo = -kPi;
  double psi_hi = kPi;

  bool contains(const Orientation& o, double tol = 1e-12) const {
    return o.theta_r >= theta_lo - tol && o.theta_r <= theta_hi + tol &&
           o.psi_r >= psi_lo - tol && o.psi_r <= psi_hi + tol;
  }
  Orientation clamp(const Orientation& o) const {
    return {std::clamp(o.theta_r, theta_lo, theta_hi), std::clamp(o.psi_r, psi_lo, psi_hi)};
  }
};

/// Polar angle from local +z and azimuth from local +x toward +y.
struct DirectionAngles {
  double theta = kPi / 2;
  double psi = 0.0;

  Vec3 unit() const {
    return Vec3(std::sin(theta) * std::cos(psi), std::sin(theta) * std::sin(psi),
                std::cos(theta));
  }
  /// Angle off the array boresight (+x).
  double boresight() const { return std::acos(std::clamp(unit().x(), -1.0, 1.0)); }
};

inline CVec steering_vector(const UpaGeometry& geom, const DirectionAngles& dir) {
  const double k = wavenumber_of(geom.wavelength);
  const double step_y = k * geom.spacing * std::sin(dir.theta) * std::sin(dir.psi);
  const double step_z = k * geom.spacing * std::cos(dir.theta);
  CVec a_y(geom.count_y);
  CVec a_z(geom.count_z);
  for (int m = 0; m < geom.count_y; ++m) a_y[m] = std::polar(1.0, step_y * m);
  for (int m = 0; m < geom.count_z; ++m) a_z[m] = std::polar(1.0, step_z * m);
  CVec out(geom.size());
  for (int iy = 0; iy < geom.count_y; ++iy) {
    out.segment(iy * geom.count_z, geom.count_z) = a_y[iy] * a_z;
  }
  return out;
}

/// R_z(psi) * R_y(theta). Columns are the array's local axes in global coordinates.
inline Mat3 rotation_matrix(const Orientation& o) {
  const double ct = std::cos(o.theta_r), st = std::sin(o.theta_r);
  const double cp = std::cos(o.psi_r), sp = std::sin(o.psi_r);
  Mat3 rz;
  rz << cp, -sp, 0, sp, cp, 0, 0, 0, 1;
  Mat3 ry;
  ry << ct, 0, st, 0, 1, 0, -st, 0, ct;
  return rz * ry;
}

/// Array normal (local +x) in global coordinates.
inline Vec3 boresight_axis(const Orientation& o) { return rotation_matrix(o).col(0); }

inline DirectionAngles angles_from_local(const Vec3& local) {
  const double theta = std::acos(std::clamp(local.z(), -1.0, 1.0));
  const double psi = std::atan2(local.y(), local.x());
  return {theta, psi};
}

struct LocalDirection {
  DirectionAngles angles;
  double boresight = 0.0;
  Vec3 components = Vec3::Zero();
};

/// Expresses a global unit direction in the rotated array frame.
inline LocalDirection local_direction(const Orientation& o, const Vec3& unit_path) {
  require(std::abs(unit_path.norm() - 1.0) <= 1e-9, "local_direction expects a unit vector");
  const Vec3 local = rotation_matrix(o).transpose() * unit_path;
  return {angles_from_local(local), std::acos(std::clamp(local.x(), -1.0, 1.0)), local};
}

struct GainPattern {
  enum class Kind { isotropic, cosine };
  Kind kind = Kind::isotropic;
  double peak_dbi = 0.0;
  double exponent = 1.0;

  static GainPattern isotropic(double gain_dbi) { return {Kind::isotropic, gain_dbi, 0.0}; }
  static GainPattern cosine(double exponent, double peak_dbi) {
    return {Kind::cosine, peak_dbi, exponent};
  }
};

/// Linear power gain toward a local direction.
inline double element_gain(const GainPattern& pattern, const DirectionAngles& dir) {
  const double peak = db_to_linear(pattern.peak_dbi);
  if (pattern.kind == GainPattern::Kind::isotropic) return peak;
  const double c = dir.unit().x();
  if (c <= 1e-12) return 0.0;
  return peak * std::pow(c, pattern.exponent);
}

}  // namespace risplan
