#pragma once

#include "risplan/scene.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace risplan {

enum class PathKind { los, reflection };

/// One propagation path. `arrive_dir` points from the receiver back along the incoming ray.
struct PathRecord {
  PathKind kind = PathKind::los;
  double attenuation = 0.0;
  double phase = 0.0;
  double length = 0.0;
  Vec3 depart_dir = Vec3::UnitX();
  Vec3 arrive_dir = -Vec3::UnitX();
  int face = -1;
};

struct PropagationConfig {
  double carrier_freq = 28e9;
  double reflection_loss_db = 10.0;
  int max_paths = 8;
  /// Allowed loss in excess of free-space loss over the straight-line distance.
  double pl_max_db = 20.0;
  bool ground_reflection = true;

  double wavelength() const { return wavelength_of(carrier_freq); }

  const PropagationConfig& validated() const {
    require(carrier_freq > 0.0, "carrier frequency must be > 0");
    require(reflection_loss_db >= 0.0, "reflection loss must be >= 0 dB");
    require(max_paths >= 1, "max_paths must be >= 1");
    return *this;
  }
};

inline double fspl_db(double distance, double wavelength) {
  return 20.0 * std::log10(4.0 * kPi * distance / wavelength);
}

inline double fspl_amplitude(double distance, double wavelength) {
  return std::min(1.0, wavelength / (4.0 * kPi * distance));
}

inline double path_loss_db(const PathRecord& path) { return -20.0 * std::log10(path.attenuation); }

inline double excess_loss_db(const PathRecord& path, double straight_distance, double wavelength) {
  return path_loss_db(path) - fspl_db(straight_distance, wavelength);
}

/// Mirror image of `p` across the plane of `face`.
inline Vec3 mirror_across(const Face& face, const Vec3& p) {
  return p - 2.0 * (p - face.origin).dot(face.normal) * face.normal;
}

/// Image-method specular point on `face`, if it exists and lies on the face.
inline std::optional<Vec3> specular_point(const Scene& scene, const Face& face, const Vec3& a,
                                          const Vec3& b) {
  constexpr double eps = 1e-9;
  const double da = (a - face.origin).dot(face.normal);
  const double db = (b - face.origin).dot(face.normal);
  if (da <= eps || db <= eps) return std::nullopt;
  const Vec3 image = mirror_across(face, a);
  const double denom = (b - image).dot(face.normal);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  const double t = (face.origin - image).dot(face.normal) / denom;
  if (t <= 0.0 || t >= 1.0) return std::nullopt;
  const Vec3 s = image + t * (b - image);

  switch (face.kind) {
    case FaceKind::wall: {
      const double u = (s - face.origin).dot(face.u_axis);
      if (u < 0.0 || u > face.length || s.z() < 0.0 || s.z() > face.height) return std::nullopt;
      break;
    }
    case FaceKind::roof: {
      const auto& fp = scene.buildings()[static_cast<std::size_t>(face.building)].footprint();
      if (!geometry::point_in_polygon(s.head<2>(), fp)) return std::nullopt;
      break;
    }
    case FaceKind::ground: {
      const Box3& bx = scene.bounds();
      if (s.x() < bx.min.x() || s.x() > bx.max.x() || s.y() < bx.min.y() || s.y() > bx.max.y()) {
        return std::nullopt;
      }
      if (scene.inside_building_xy(s.head<2>())) return std::nullopt;
      break;
    }
  }
  return s;
}

/// LoS plus first-order specular reflections, strongest first.
inline std::vector<PathRecord> enumerate_paths(const Scene& scene, const PropagationConfig& cfg,
                                               const Vec3& a, const Vec3& b) {
  cfg.validated();
  const double straight = (b - a).norm();
  require(straight > 0.0, "enumerate_paths: endpoints coincide");
  const double lambda = cfg.wavelength();
  const double k = wavenumber_of(lambda);
  const double bounce = std::pow(10.0, -cfg.reflection_loss_db / 20.0);

  std::vector<PathRecord> paths;
  if (line_of_sight(scene, a, b)) {
    PathRecord p;
    p.kind = PathKind::los;
    p.length = straight;
    p.attenuation = fspl_amplitude(straight, lambda);
    p.phase = wrap_phase(-k * straight);
    p.depart_dir = (b - a) / straight;
    p.arrive_dir = -p.depart_dir;
    paths.push_back(p);
  }
  for (const Face& face : scene.faces()) {
    if (face.kind == FaceKind::ground && !cfg.ground_reflection) continue;
    auto s = specular_point(scene, face, a, b);
    if (!s) continue;
    const double l1 = (*s - a).norm();
    const double l2 = (b - *s).norm();
    if (l1 <= 1e-9 || l2 <= 1e-9) continue;
    if (!line_of_sight(scene, a, *s) || !line_of_sight(scene, *s, b)) continue;
    PathRecord p;
    p.kind = PathKind::reflection;
    p.face = face.id;
    p.length = l1 + l2;
    p.attenuation = fspl_amplitude(p.length, lambda) * bounce;
    p.phase = wrap_phase(-k * p.length);
    p.depart_dir = (*s - a) / l1;
    p.arrive_dir = (*s - b) / l2;
    paths.push_back(p);
  }
  std::stable_sort(paths.begin(), paths.end(), [](const PathRecord& x, const PathRecord& y) {
    if (x.attenuation != y.attenuation) return x.attenuation > y.attenuation;
    return x.length < y.length;
  });
  const double baseline = fspl_db(straight, lambda);
  std::vector<PathRecord> kept;
  for (const auto& p : paths) {
    if (static_cast<int>(kept.size()) >= cfg.max_paths) break;
    if (path_loss_db(p) - baseline <= cfg.pl_max_db + 1e-12) kept.push_back(p);
  }
  return kept;
}

/// Strongest path; equal amplitudes resolve to the shorter one.
inline PathRecord dominant_path(const std::vector<PathRecord>& paths) {
  if (paths.empty()) fail(ErrorCode::no_path, "dominant_path: empty path list");
  const PathRecord* best = &paths.front();
  for (const auto& p : paths) {
    if (p.attenuation > best->attenuation ||
        (p.attenuation == best->attenuation && p.length < best->length)) {
      best = &p;
    }
  }
  return *best;
}

}  // namespace risplan
