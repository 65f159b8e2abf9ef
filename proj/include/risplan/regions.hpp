#pragma once

#include "risplan/propagation.hpp"
#include "risplan/scene.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <vector>

namespace risplan {

/// Rectangle on a wall face in (u along the edge, z) coordinates.
struct FacePatch {
  int face_id = -1;
  double u0 = 0.0, u1 = 0.0;
  double z0 = 0.0, z1 = 0.0;

  double area() const { return (u1 - u0) * (z1 - z0); }
};

struct DeployableRegion {
  int ris_index = -1;
  std::vector<FacePatch> patches;
  std::vector<int> covered_cells;
  double coverage_area = 0.0;
};

struct LinkAccessRules {
  double pl_max_db = 20.0;
  double patch_step = 0.5;
  double tile_width = 4.0;
  double mount_min = 3.0;
  double roof_margin = 0.5;
  /// Panel offset from the wall along its outward normal.
  double standoff = 0.05;
  /// Widen each selected region with same-face tiles that serve all of its cells.
  bool merge_face_tiles = true;
};

inline Vec3 patch_point(const Scene& scene, const FacePatch& patch, double u, double z,
                        double standoff) {
  const Face& f = scene.face(patch.face_id);
  return f.point(u, z) + standoff * f.normal;
}

inline std::vector<Vec3> patch_samples(const Scene& scene, const FacePatch& patch, double step,
                                       double standoff) {
  const int nu = std::max(1, static_cast<int>(std::ceil((patch.u1 - patch.u0) / step - 1e-9)));
  const int nz = std::max(1, static_cast<int>(std::ceil((patch.z1 - patch.z0) / step - 1e-9)));
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>((nu + 1) * (nz + 1)));
  for (int iz = 0; iz <= nz; ++iz) {
    for (int iu = 0; iu <= nu; ++iu) {
      double u = patch.u0 + (patch.u1 - patch.u0) * iu / nu;
      double z = patch.z0 + (patch.z1 - patch.z0) * iz / nz;
      pts.push_back(patch_point(scene, patch, u, z, standoff));
    }
  }
  return pts;
}

/// Corners and center of a patch.
inline std::vector<Vec3> patch_anchor_points(const Scene& scene, const FacePatch& patch,
                                             double standoff) {
  const double um = 0.5 * (patch.u0 + patch.u1);
  const double zm = 0.5 * (patch.z0 + patch.z1);
  return {patch_point(scene, patch, um, zm, standoff),
          patch_point(scene, patch, patch.u0, patch.z0, standoff),
          patch_point(scene, patch, patch.u1, patch.z0, standoff),
          patch_point(scene, patch, patch.u0, patch.z1, standoff),
          patch_point(scene, patch, patch.u1, patch.z1, standoff)};
}

inline Vec3 nearest_region_point(const Scene& scene, const DeployableRegion& region,
                                 const Vec3& p, double standoff) {
  require(!region.patches.empty(), "region has no patches");
  Vec3 best = Vec3::Zero();
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& patch : region.patches) {
    const Face& f = scene.face(patch.face_id);
    double u = std::clamp((p - f.origin).dot(f.u_axis), patch.u0, patch.u1);
    double z = std::clamp(p.z(), patch.z0, patch.z1);
    Vec3 q = patch_point(scene, patch, u, z, standoff);
    double d = (q - p).norm();
    if (d < best_d) {
      best_d = d;
      best = q;
    }
  }
  return best;
}

template <class Rng>
Vec3 sample_region_point(const Scene& scene, const DeployableRegion& region, double standoff,
                         Rng& rng) {
  require(!region.patches.empty(), "region has no patches");
  std::vector<double> weights;
  for (const auto& p : region.patches) weights.push_back(std::max(p.area(), 1e-12));
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  const FacePatch& patch = region.patches[pick(rng)];
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = patch.u0 + (patch.u1 - patch.u0) * unit(rng);
  double z = patch.z0 + (patch.z1 - patch.z0) * unit(rng);
  return patch_point(scene, patch, u, z, standoff);
}

inline bool sees_bs_and_uav(const Scene& scene, const Vec3& p, const std::vector<Vec3>& uav) {
  if (!line_of_sight(scene, p, scene.bs_position())) return false;
  return std::all_of(uav.begin(), uav.end(),
                     [&](const Vec3& u) { return line_of_sight(scene, p, u); });
}

inline bool reaches_cell(const Scene& scene, const PropagationConfig& prop, double pl_max_db,
                         const Vec3& p, const Vec3& cell) {
  PropagationConfig cfg = prop;
  cfg.pl_max_db = pl_max_db;
  return !enumerate_paths(scene, cfg, p, cell).empty();
}

/// Link-access rules checked at the patch sample points: one point must see the BS, every UAV
/// cell center, and reach every covered UE cell within the excess-loss budget.
inline bool validate_link_access(const Scene& scene, const DeployableRegion& region,
                                 const GridSet& ue_grid, const GridSet& uav_grid,
                                 const PropagationConfig& prop, const LinkAccessRules& rules) {
  const auto uav = uav_grid.centers();
  for (const auto& patch : region.patches) {
    for (const Vec3& p : patch_samples(scene, patch, rules.patch_step, rules.standoff)) {
      if (!sees_bs_and_uav(scene, p, uav)) continue;
      bool all = std::all_of(region.covered_cells.begin(), region.covered_cells.end(), [&](int c) {
        return reaches_cell(scene, prop, rules.pl_max_db, p,
                            ue_grid.cells.at(static_cast<std::size_t>(c)).center);
      });
      if (all) return true;
    }
  }
  return false;
}

/// Tiles every wall into candidate patches. A tile keeps the tallest band of sample rows whose
/// points all see the BS and the UAV area; its cells are the targets reachable from all anchors.
inline std::vector<DeployableRegion> generate_candidates(const Scene& scene,
                                                         const GridSet& ue_grid,
                                                         const std::vector<int>& target_cells,
                                                         const GridSet& uav_grid,
                                                         const PropagationConfig& prop,
                                                         const LinkAccessRules& rules) {
  require(rules.patch_step > 0.0 && rules.tile_width > 0.0, "patch step and tile width must be > 0");
  const auto uav = uav_grid.centers();
  std::vector<DeployableRegion> out;
  for (const Face& face : scene.faces()) {
    if (face.kind != FaceKind::wall) continue;
    const double z_lo = rules.mount_min;
    const double z_hi = face.height - rules.roof_margin;
    if (z_hi - z_lo < rules.patch_step) continue;
    const int tiles = std::max(1, static_cast<int>(std::lround(face.length / rules.tile_width)));
    const int rows = static_cast<int>(std::floor((z_hi - z_lo) / rules.patch_step + 1e-9)) + 1;
    for (int t = 0; t < tiles; ++t) {
      const double u0 = face.length * t / tiles;
      const double u1 = face.length * (t + 1) / tiles;
      const int cols =
          std::max(1, static_cast<int>(std::ceil((u1 - u0) / rules.patch_step - 1e-9)));
      std::vector<bool> row_ok(static_cast<std::size_t>(rows), true);
      for (int r = 0; r < rows; ++r) {
        const double z = z_lo + r * rules.patch_step;
        for (int c = 0; c <= cols && row_ok[static_cast<std::size_t>(r)]; ++c) {
          const double u = u0 + (u1 - u0) * c / cols;
          Vec3 p = face.point(u, z) + rules.standoff * face.normal;
          if (!sees_bs_and_uav(scene, p, uav)) row_ok[static_cast<std::size_t>(r)] = false;
        }
      }
      int best_start = -1, best_len = 0;
      for (int r = 0; r < rows;) {
        if (!row_ok[static_cast<std::size_t>(r)]) {
          ++r;
          continue;
        }
        int s = r;
        while (r < rows && row_ok[static_cast<std::size_t>(r)]) ++r;
        if (r - s > best_len) {
          best_len = r - s;
          best_start = s;
        }
      }
      if (best_len < 2) continue;
      FacePatch patch{face.id, u0, u1, z_lo + best_start * rules.patch_step,
                      z_lo + (best_start + best_len - 1) * rules.patch_step};
      const auto anchors = patch_anchor_points(scene, patch, rules.standoff);
      DeployableRegion region;
      region.patches.push_back(patch);
      for (int cell : target_cells) {
        const Vec3& center = ue_grid.cells.at(static_cast<std::size_t>(cell)).center;
        bool ok = std::all_of(anchors.begin(), anchors.end(), [&](const Vec3& a) {
          return reaches_cell(scene, prop, rules.pl_max_db, a, center);
        });
        if (ok) {
          region.covered_cells.push_back(cell);
          region.coverage_area += ue_grid.cells[static_cast<std::size_t>(cell)].area();
        }
      }
      if (!region.covered_cells.empty()) out.push_back(std::move(region));
    }
  }
  return out;
}

/// Greedy set cover. Each round takes the set covering the most uncovered elements; ties go to
/// the lowest index. Returns the chosen set indices in selection order.
inline std::vector<std::size_t> greedy_set_cover(const std::vector<int>& universe,
                                                 const std::vector<std::vector<int>>& sets) {
  std::set<int> remaining(universe.begin(), universe.end());
  {
    std::set<int> coverable;
    for (const auto& s : sets) coverable.insert(s.begin(), s.end());
    std::vector<int> orphans;
    for (int e : remaining) {
      if (!coverable.count(e)) orphans.push_back(e);
    }
    if (!orphans.empty()) {
      std::ostringstream msg;
      msg << "no candidate covers cells:";
      for (int e : orphans) msg << ' ' << e;
      fail(ErrorCode::infeasible_coverage, msg.str());
    }
  }
  std::vector<std::size_t> chosen;
  while (!remaining.empty()) {
    std::size_t best = 0;
    std::size_t best_gain = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      std::set<int> distinct(sets[i].begin(), sets[i].end());
      std::size_t gain = 0;
      for (int e : distinct) gain += remaining.count(e);
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    chosen.push_back(best);
    for (int e : sets[best]) remaining.erase(e);
  }
  return chosen;
}

/// Picks RIS regions covering `uncovered_cells`. Each cell is assigned to the region that first
/// covered it, so the returned coverage sets partition the input.
inline std::vector<DeployableRegion> select_ris_regions(
    [[maybe_unused]] const Scene& scene, const GridSet& ue_grid, const std::vector<int>& uncovered_cells,
    const std::vector<DeployableRegion>& candidates, const LinkAccessRules& rules = {}) {
  std::vector<std::vector<int>> sets;
  sets.reserve(candidates.size());
  for (const auto& c : candidates) sets.push_back(c.covered_cells);
  const auto chosen = greedy_set_cover(uncovered_cells, sets);

  std::set<int> remaining(uncovered_cells.begin(), uncovered_cells.end());
  std::vector<DeployableRegion> out;
  for (std::size_t idx : chosen) {
    DeployableRegion region;
    region.ris_index = static_cast<int>(out.size());
    region.patches = candidates[idx].patches;
    for (int cell : candidates[idx].covered_cells) {
      if (remaining.erase(cell)) {
        region.covered_cells.push_back(cell);
        region.coverage_area += ue_grid.cells.at(static_cast<std::size_t>(cell)).area();
      }
    }
    if (rules.merge_face_tiles) {
      const int face = region.patches.front().face_id;
      for (std::size_t j = 0; j < candidates.size(); ++j) {
        if (j == idx) continue;
        const auto& other = candidates[j];
        if (other.patches.size() != 1 || other.patches.front().face_id != face) continue;
        std::set<int> has(other.covered_cells.begin(), other.covered_cells.end());
        bool superset = std::all_of(region.covered_cells.begin(), region.covered_cells.end(),
                                    [&](int c) { return has.count(c) > 0; });
        if (superset) region.patches.push_back(other.patches.front());
      }
      std::sort(region.patches.begin(), region.patches.end(),
                [](const FacePatch& a, const FacePatch& b) { return a.u0 < b.u0; });
    }
    out.push_back(std::move(region));
  }
  return out;
}

}  // namespace risplan
