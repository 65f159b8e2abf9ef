#pragma once

#include "risplan/core.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace risplan {

struct Rect2 {
  Vec2 min = Vec2::Zero();
  Vec2 max = Vec2::Zero();

  double width() const { return max.x() - min.x(); }
  double depth() const { return max.y() - min.y(); }
  bool contains(const Vec2& p, double tol = 1e-9) const {
    return p.x() >= min.x() - tol && p.x() <= max.x() + tol && p.y() >= min.y() - tol &&
           p.y() <= max.y() + tol;
  }
};

struct Box3 {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p, double tol = 1e-9) const {
    return (p.array() >= min.array() - tol).all() && (p.array() <= max.array() + tol).all();
  }
};

namespace geometry {

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double signed_area(const std::vector<Vec2>& poly) {
  double area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    area += cross2(poly[i], poly[(i + 1) % poly.size()]);
  }
  return 0.5 * area;
}

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 ab = b - a;
  double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + t * ab - p).norm();
}

/// Even-odd ray casting. Points exactly on an edge may go either way.
inline bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& pi = poly[i];
    const Vec2& pj = poly[j];
    if ((pi.y() > p.y()) != (pj.y() > p.y())) {
      double x = pj.x() + (p.y() - pj.y()) * (pi.x() - pj.x()) / (pi.y() - pj.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

/// Inside and farther than `tol` from every edge.
inline bool point_strictly_in_polygon(const Vec2& p, const std::vector<Vec2>& poly,
                                      double tol = 1e-9) {
  if (!point_in_polygon(p, poly)) return false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    if (point_segment_distance(p, poly[i], poly[(i + 1) % poly.size()]) <= tol) return false;
  }
  return true;
}

inline bool segments_properly_intersect(const Vec2& a, const Vec2& b, const Vec2& c,
                                        const Vec2& d) {
  double d1 = cross2(b - a, c - a);
  double d2 = cross2(b - a, d - a);
  double d3 = cross2(d - c, a - c);
  double d4 = cross2(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 &&
         d4 != 0;
}

}  // namespace geometry

/// Vertical prism: polygon footprint extruded from z = 0 to `height`.
class Building {
 public:
  Building(std::vector<Vec2> footprint, double height)
      : footprint_(std::move(footprint)), height_(height) {
    require(footprint_.size() >= 3, "building footprint needs at least 3 vertices");
    require(std::isfinite(height_) && height_ > 0.0, "building height must be > 0");
    for (std::size_t i = 0; i < footprint_.size(); ++i) {
      for (std::size_t j = i + 1; j < footprint_.size(); ++j) {
        bool adjacent = j == i + 1 || (i == 0 && j + 1 == footprint_.size());
        if (adjacent) continue;
        const Vec2& a = footprint_[i];
        const Vec2& b = footprint_[(i + 1) % footprint_.size()];
        const Vec2& c = footprint_[j];
        const Vec2& d = footprint_[(j + 1) % footprint_.size()];
        require(!geometry::segments_properly_intersect(a, b, c, d),
                "building footprint is self-intersecting");
      }
    }
    double area = geometry::signed_area(footprint_);
    require(std::abs(area) > 1e-9, "building footprint has zero area");
    if (area < 0.0) std::reverse(footprint_.begin(), footprint_.end());
    lo_ = hi_ = footprint_.front();
    for (const auto& p : footprint_) {
      lo_ = lo_.cwiseMin(p);
      hi_ = hi_.cwiseMax(p);
    }
  }

  /// Counter-clockwise footprint.
  const std::vector<Vec2>& footprint() const { return footprint_; }
  double height() const { return height_; }
  const Vec2& footprint_min() const { return lo_; }
  const Vec2& footprint_max() const { return hi_; }

  bool contains_xy(const Vec2& p) const {
    if ((p.array() < lo_.array()).any() || (p.array() > hi_.array()).any()) return false;
    return geometry::point_in_polygon(p, footprint_);
  }

  /// True if the open segment (a, b) passes through the prism interior.
  bool blocks(const Vec3& a, const Vec3& b) const {
    constexpr double eps = 1e-9;
    const Vec3 d = b - a;
    const double len = d.norm();
    if (len <= 0.0) return false;
    double t0 = eps / len;
    double t1 = 1.0 - eps / len;

    if (std::abs(d.z()) < 1e-15) {
      if (a.z() <= 0.0 || a.z() >= height_) return false;
    } else {
      double ta = (0.0 - a.z()) / d.z();
      double th = (height_ - a.z()) / d.z();
      t0 = std::max(t0, std::min(ta, th));
      t1 = std::min(t1, std::max(ta, th));
    }
    if (t1 - t0 <= eps / len) return false;

    const Vec2 a2 = a.head<2>();
    const Vec2 d2 = d.head<2>();
    const Vec2 p0 = a2 + t0 * d2;
    const Vec2 p1 = a2 + t1 * d2;
    if (std::max(p0.x(), p1.x()) < lo_.x() || std::min(p0.x(), p1.x()) > hi_.x() ||
        std::max(p0.y(), p1.y()) < lo_.y() || std::min(p0.y(), p1.y()) > hi_.y()) {
      return false;
    }
    if (d2.norm() < 1e-12) return geometry::point_strictly_in_polygon(a2, footprint_);

    std::vector<double> cuts{t0, t1};
    for (std::size_t i = 0; i < footprint_.size(); ++i) {
      const Vec2& c = footprint_[i];
      const Vec2 e = footprint_[(i + 1) % footprint_.size()] - c;
      double denom = geometry::cross2(d2, e);
      if (std::abs(denom) < 1e-15) continue;
      double t = geometry::cross2(c - a2, e) / denom;
      double s = geometry::cross2(c - a2, d2) / denom;
      if (t > t0 && t < t1 && s >= -1e-12 && s <= 1.0 + 1e-12) cuts.push_back(t);
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      if (cuts[i + 1] - cuts[i] <= 1e-12) continue;
      Vec2 mid = a2 + 0.5 * (cuts[i] + cuts[i + 1]) * d2;
      if (geometry::point_strictly_in_polygon(mid, footprint_)) return true;
    }
    return false;
  }

 private:
  std::vector<Vec2> footprint_;
  double height_;
  Vec2 lo_, hi_;
};

enum class FaceKind { wall, roof, ground };

/// A reflecting planar surface. Walls use (u along the footprint edge, z) coordinates.
struct Face {
  int id = 0;
  FaceKind kind = FaceKind::wall;
  int building = -1;
  int edge = -1;
  Vec3 origin = Vec3::Zero();
  Vec3 u_axis = Vec3::UnitX();
  Vec3 normal = Vec3::UnitZ();
  double length = 0.0;
  double height = 0.0;

  Vec3 point(double u, double z) const { return origin + u * u_axis + z * Vec3::UnitZ(); }
  double azimuth() const { return std::atan2(normal.y(), normal.x()); }
};

/// Named rectangular ground area at a fixed height (UE coverage areas, UAV flight area).
struct Area {
  std::string name;
  Rect2 rect;
  double height = 0.0;
};

/// Urban scene. Immutable after construction.
class Scene {
 public:
  Scene(std::vector<Building> buildings, Vec3 bs_position, Box3 bounds,
        std::vector<Area> ue_areas = {}, std::optional<Area> uav_area = std::nullopt)
      : buildings_(std::move(buildings)),
        bs_(std::move(bs_position)),
        bounds_(std::move(bounds)),
        ue_areas_(std::move(ue_areas)),
        uav_area_(std::move(uav_area)) {
    require((bounds_.max.array() > bounds_.min.array()).all(), "scene bounds are empty");
    require(bounds_.contains(bs_), "bs position lies outside the scene bounds");
    build_faces();
  }

  const std::vector<Building>& buildings() const { return buildings_; }
  const Vec3& bs_position() const { return bs_; }
  const Box3& bounds() const { return bounds_; }
  const std::vector<Area>& ue_areas() const { return ue_areas_; }
  const std::optional<Area>& uav_area() const { return uav_area_; }
  const std::vector<Face>& faces() const { return faces_; }
  const Face& face(int id) const { return faces_.at(static_cast<std::size_t>(id)); }

  bool inside_building_xy(const Vec2& p) const {
    return std::any_of(buildings_.begin(), buildings_.end(),
                       [&](const Building& b) { return b.contains_xy(p); });
  }

 private:
  void build_faces() {
    for (std::size_t bi = 0; bi < buildings_.size(); ++bi) {
      const auto& fp = buildings_[bi].footprint();
      for (std::size_t e = 0; e < fp.size(); ++e) {
        Vec2 p0 = fp[e];
        Vec2 p1 = fp[(e + 1) % fp.size()];
        Vec2 dir = p1 - p0;
        Face f;
        f.id = static_cast<int>(faces_.size());
        f.kind = FaceKind::wall;
        f.building = static_cast<int>(bi);
        f.edge = static_cast<int>(e);
        f.origin = Vec3(p0.x(), p0.y(), 0.0);
        f.length = dir.norm();
        f.u_axis = Vec3(dir.x(), dir.y(), 0.0) / f.length;
        f.normal = Vec3(dir.y(), -dir.x(), 0.0) / f.length;
        f.height = buildings_[bi].height();
        faces_.push_back(f);
      }
    }
    for (std::size_t bi = 0; bi < buildings_.size(); ++bi) {
      Face f;
      f.id = static_cast<int>(faces_.size());
      f.kind = FaceKind::roof;
      f.building = static_cast<int>(bi);
      f.origin = Vec3(0.0, 0.0, buildings_[bi].height());
      f.normal = Vec3::UnitZ();
      faces_.push_back(f);
    }
    Face g;
    g.id = static_cast<int>(faces_.size());
    g.kind = FaceKind::ground;
    g.normal = Vec3::UnitZ();
    faces_.push_back(g);
  }

  std::vector<Building> buildings_;
  Vec3 bs_;
  Box3 bounds_;
  std::vector<Area> ue_areas_;
  std::optional<Area> uav_area_;
  std::vector<Face> faces_;
};

/// True iff the open segment (a, b) meets no building prism.
inline bool line_of_sight(const Scene& scene, const Vec3& a, const Vec3& b) {
  require((a - b).norm() > 0.0, "line_of_sight: degenerate segment (a = b)");
  for (const auto& building : scene.buildings()) {
    if (building.blocks(a, b)) return false;
  }
  return true;
}

struct GridCell {
  Vec3 center = Vec3::Zero();
  Vec2 extent = Vec2::Zero();

  double area() const { return extent.x() * extent.y(); }
};

struct GridSet {
  std::string name;
  double height = 0.0;
  std::vector<GridCell> cells;

  std::size_t size() const { return cells.size(); }
  std::vector<Vec3> centers() const {
    std::vector<Vec3> out;
    out.reserve(cells.size());
    for (const auto& c : cells) out.push_back(c.center);
    return out;
  }
};

/// Uniform tiling of `area`; cells centered inside a building footprint are dropped.
inline GridSet build_grids(const Scene& scene, const Rect2& area, const Vec2& cell_size,
                           double height, std::string name = {}) {
  require(cell_size.x() > 0.0 && cell_size.y() > 0.0, "cell_size components must be > 0");
  const auto nx = static_cast<long>(std::floor(area.width() / cell_size.x() + 1e-9));
  const auto ny = static_cast<long>(std::floor(area.depth() / cell_size.y() + 1e-9));
  require(nx > 0 && ny > 0, "cell_size larger than the requested area");
  GridSet grid;
  grid.name = std::move(name);
  grid.height = height;
  for (long iy = 0; iy < ny; ++iy) {
    for (long ix = 0; ix < nx; ++ix) {
      Vec2 c(area.min.x() + (static_cast<double>(ix) + 0.5) * cell_size.x(),
             area.min.y() + (static_cast<double>(iy) + 0.5) * cell_size.y());
      if (scene.inside_building_xy(c)) continue;
      Vec3 center(c.x(), c.y(), height);
      require(scene.bounds().contains(center), "grid cell center outside scene bounds");
      grid.cells.push_back({center, cell_size});
    }
  }
  return grid;
}

inline GridSet build_grids(const Scene& scene, const Area& area, const Vec2& cell_size) {
  return build_grids(scene, area.rect, cell_size, area.height, area.name);
}

}  // namespace risplan
