#pragma once

#include "risplan/bs_beamforming.hpp"
#include "risplan/channel.hpp"
#include "risplan/parallel.hpp"
#include "risplan/regions.hpp"
#include "risplan/ris_beamforming.hpp"
#include "risplan/sensing.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace risplan {

struct QosThresholds {
  double snr_threshold = 100.0;
  double range_crb_max = 4e-4;
  double velocity_crb_max = 1e-2;

  const QosThresholds& validated() const {
    require(snr_threshold > 0.0 && range_crb_max > 0.0 && velocity_crb_max > 0.0,
            "QoS thresholds must be > 0");
    return *this;
  }
};

struct ConstraintConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c_max = 0.0;
};

inline ConstraintConstants constraint_constants(double gamma_ref_worst, const CrbPair& crb_ref,
                                                const QosThresholds& thresholds, double beta) {
  thresholds.validated();
  if (!(beta > 0.0 && beta < 1.0)) {
    fail(ErrorCode::invalid_input, "constraint_constants: beta must lie strictly inside (0, 1)");
  }
  require(gamma_ref_worst > 0.0, "constraint_constants: reference SNR must be > 0");
  ConstraintConstants c;
  c.c1 = thresholds.snr_threshold / (beta * gamma_ref_worst);
  c.c2 = crb_ref.range_crb / ((1.0 - beta) * thresholds.range_crb_max);
  c.c3 = crb_ref.velocity_crb / ((1.0 - beta) * thresholds.velocity_crb_max);
  c.c_max = std::max({c.c1, c.c2, c.c3});
  return c;
}

/// Communication-only variant: β = 1 and no sensing terms.
inline ConstraintConstants comm_only_constants(double gamma_ref_worst, const QosThresholds& thresholds) {
  thresholds.validated();
  require(gamma_ref_worst > 0.0, "comm_only_constants: reference SNR must be > 0");
  ConstraintConstants c;
  c.c1 = thresholds.snr_threshold / gamma_ref_worst;
  c.c_max = c.c1;
  return c;
}

/// Closed-form minimizer of Σ √c_n·A_u·M_ref/(√ω_n·A_n) subject to Σ ω_n = 1 − ω_0.
inline Eigen::VectorXd kkt_power_allocation(const std::vector<double>& c,
                                            const std::vector<double>& cov_areas, double omega0) {
  require(!c.empty() && c.size() == cov_areas.size(), "kkt_power_allocation: size mismatch");
  if (!(omega0 < 1.0)) fail(ErrorCode::infeasible_power, "kkt_power_allocation: omega0 must be < 1");
  require(omega0 >= 0.0, "kkt_power_allocation: omega0 must be >= 0");
  Eigen::VectorXd w(static_cast<Eigen::Index>(c.size()));
  for (std::size_t n = 0; n < c.size(); ++n) {
    require(c[n] > 0.0 && cov_areas[n] > 0.0, "kkt_power_allocation: c and areas must be > 0");
    // The common factor A_u·M_ref/2 cancels in the normalization.
    w[static_cast<Eigen::Index>(n)] = std::cbrt(c[n] / (cov_areas[n] * cov_areas[n]));
  }
  return w / w.sum() * (1.0 - omega0);
}

/// Σ √c_n·A_u·M_ref/(√ω_n·A_n^cov).
inline double p1_objective(const std::vector<double>& c, const std::vector<double>& cov_areas,
                           const Eigen::VectorXd& omega, double unit_area, int m_ref) {
  double e = 0.0;
  for (std::size_t n = 0; n < c.size(); ++n) {
    e += std::sqrt(c[n]) * unit_area * m_ref /
         (std::sqrt(omega[static_cast<Eigen::Index>(n)]) * cov_areas[n]);
  }
  return e;
}

struct RisSize {
  double area = 0.0;
  double side = 0.0;
  int cells_per_side = 0;
  long cells = 0;
};

inline RisSize ris_size(double c_max, double omega, double unit_area, int m_ref) {
  require(c_max > 0.0 && unit_area > 0.0 && m_ref > 0, "ris_size: c, unit area and M_ref must be > 0");
  if (!(omega > 0.0)) fail(ErrorCode::infeasible_power, "ris_size: omega must be > 0");
  RisSize s;
  s.area = std::sqrt(c_max) * unit_area * m_ref / std::sqrt(omega);
  s.side = std::sqrt(s.area);
  s.cells_per_side = static_cast<int>(std::ceil(s.side / std::sqrt(unit_area) - 1e-9));
  s.cells = static_cast<long>(s.cells_per_side) * s.cells_per_side;
  return s;
}

/// Unit directions from the RIS toward the BS and each target.
struct OrientationTargets {
  Vec3 to_bs = Vec3::UnitX();
  std::vector<Vec3> to_ue;
  std::vector<Vec3> to_uav;
  /// Directions at or beyond this angle from boresight count as unreachable.
  double max_angle = kPi / 2;
};

/// cosϑ_b·(mean_k cosϑ_k + mean_u cosϑ_u) with back-side cosines clipped at 0.
/// Proportional to A_avg; the (A_u·M_ref)² prefactor does not affect the argmax.
inline double orientation_score(const Orientation& o, const OrientationTargets& t) {
  const Vec3 n = boresight_axis(o);
  const double cb = std::max(0.0, n.dot(t.to_bs));
  if (cb == 0.0) return 0.0;
  auto mean_cos = [&](const std::vector<Vec3>& dirs) {
    if (dirs.empty()) return 0.0;
    double s = 0.0;
    for (const Vec3& d : dirs) s += std::max(0.0, n.dot(d));
    return s / static_cast<double>(dirs.size());
  };
  return cb * (mean_cos(t.to_ue) + mean_cos(t.to_uav));
}

/// Ranks orientations by how many targets fall inside the reachable cone (the BS must), then
/// by the score.
struct OrientationRank {
  int inside = -1;
  double score = -1.0;
  bool operator>(const OrientationRank& o) const {
    return inside != o.inside ? inside > o.inside : score > o.score;
  }
};

inline OrientationRank orientation_rank(const Orientation& o, const OrientationTargets& t) {
  const Vec3 n = boresight_axis(o);
  const double c = std::cos(t.max_angle);
  OrientationRank r;
  r.score = orientation_score(o, t);
  if (!(n.dot(t.to_bs) > c)) {
    r.inside = 0;
    return r;
  }
  r.inside = 1;
  for (const Vec3& d : t.to_ue) r.inside += n.dot(d) > c;
  for (const Vec3& d : t.to_uav) r.inside += n.dot(d) > c;
  return r;
}

/// Grid search at `step` followed by a compass search refinement inside the bounds.
inline Orientation orientation_search(const OrientationTargets& targets,
                                      const OrientationBounds& bounds, double step = deg_to_rad(1.0)) {
  require(bounds.theta_hi >= bounds.theta_lo && bounds.psi_hi >= bounds.psi_lo,
          "orientation_search: empty bounds");
  require(step > 0.0, "orientation_search: step must be > 0");
  const int nt = static_cast<int>(std::floor((bounds.theta_hi - bounds.theta_lo) / step + 1e-9));
  const int np = static_cast<int>(std::floor((bounds.psi_hi - bounds.psi_lo) / step + 1e-9));
  Orientation best{bounds.theta_lo, bounds.psi_lo};
  OrientationRank best_rank;
  for (int i = 0; i <= nt; ++i) {
    for (int j = 0; j <= np; ++j) {
      const Orientation o{bounds.theta_lo + i * step, bounds.psi_lo + j * step};
      const OrientationRank r = orientation_rank(o, targets);
      if (r > best_rank) {
        best_rank = r;
        best = o;
      }
    }
  }
  if (!(best_rank.score > 0.0)) {
    fail(ErrorCode::unreachable_targets, "orientation_search: every orientation misses the BS or all targets");
  }
  double h = step;
  while (h > 1e-7) {
    bool improved = false;
    for (const auto& d : {Vec2(1, 0), Vec2(-1, 0), Vec2(0, 1), Vec2(0, -1)}) {
      const Orientation o = bounds.clamp({best.theta_r + h * d.x(), best.psi_r + h * d.y()});
      const OrientationRank r = orientation_rank(o, targets);
      if (r > best_rank) {
        best_rank = r;
        best = o;
        improved = true;
      }
    }
    if (!improved) h *= 0.5;
  }
  return best;
}

/// Straight-line convenience form.
inline Orientation orientation_search(const Vec3& ris_pos, const Vec3& bs_pos,
                                      const std::vector<Vec3>& ue_centers,
                                      const std::vector<Vec3>& uav_centers,
                                      const OrientationBounds& bounds,
                                      double step = deg_to_rad(1.0)) {
  OrientationTargets t;
  t.to_bs = (bs_pos - ris_pos).normalized();
  for (const Vec3& p : ue_centers) t.to_ue.push_back((p - ris_pos).normalized());
  for (const Vec3& p : uav_centers) t.to_uav.push_back((p - ris_pos).normalized());
  return orientation_search(t, bounds, step);
}

enum class Mode { full_isac, comm_only, pathloss_baseline, passive_orientation };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::full_isac: return "full-isac";
    case Mode::comm_only: return "comm-only";
    case Mode::pathloss_baseline: return "pathloss-baseline";
    case Mode::passive_orientation: return "passive-orientation";
  }
  return "full-isac";
}

inline Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::full_isac, Mode::comm_only, Mode::pathloss_baseline, Mode::passive_orientation}) {
    if (to_string(m) == s) return m;
  }
  fail(ErrorCode::invalid_input, "unknown mode '" + s + "'");
}

inline bool senses(Mode m) { return m != Mode::comm_only; }

/// Physical constants and knobs shared by every evaluation.
struct SystemModel {
  LinkBudget link;
  OfdmParams ofdm;
  PropagationConfig prop;
  QosThresholds thresholds;
  AntennaArray bs_array;
  GainPattern ue_pattern = GainPattern::isotropic(3.0);
  double efficiency_comm = 0.3;
  double efficiency_sense = 0.3;
  double rcs = 0.04;
  int m_ref = 400;
  int bits = 2;
  std::vector<double> beta_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  double orientation_step = deg_to_rad(1.0);
  double theta_lo = deg_to_rad(-30.0);
  double theta_hi = deg_to_rad(60.0);
  double psi_half_width = deg_to_rad(60.0);
  /// Targets further than this from the panel normal count as unreachable.
  double max_reflection_angle = deg_to_rad(75.0);
  /// Frame integrals at full transmit power, zero delay.
  WaveformMoments moments;

  double wavelength() const { return prop.wavelength(); }
  double unit_area() const { return 0.25 * wavelength() * wavelength(); }
  double quantization_factor() const { return quantization_efficiency(bits); }
};

/// One RIS: its deployable region and the UE cells it must serve.
struct RisSite {
  DeployableRegion region;
  std::vector<Vec3> ue_centers;
  int face_id = -1;
  OrientationBounds bounds;
};

struct DeploymentProblem {
  const Scene* scene = nullptr;
  SystemModel model;
  Mode mode = Mode::full_isac;
  std::vector<RisSite> sites;
  std::vector<Vec3> uav_centers;
  double standoff = 0.05;
  /// Per UAV cell: direct-path reference CRBs at full power and the minimum BS weight ω_0.
  std::vector<CrbPair> direct_crb_ref;
  std::vector<double> omega0;
  int threads = 1;
};

/// ‖sqrt(G_b)·a_bᵀ‖² toward a direction, i.e. M_b·G_b for a matched beam.
inline double bs_beam_gain(const AntennaArray& bs, const Vec3& dir) {
  return array_response(bs, dir).squaredNorm();
}

/// Matched-beam BS→target channel power over all paths (target side is passive).
inline double bs_target_gain(const Scene& scene, const SystemModel& model, const Vec3& target) {
  const auto paths = enumerate_paths(scene, model.prop, scene.bs_position(), target);
  if (paths.empty()) return 0.0;
  return direct_channel(paths, model.bs_array, GainPattern::isotropic(0.0)).squaredNorm();
}

inline DeploymentProblem make_problem(const Scene& scene, SystemModel model, Mode mode,
                                      const std::vector<DeployableRegion>& regions,
                                      const GridSet& ue_grid, const GridSet& uav_grid,
                                      double standoff) {
  model.thresholds.validated();
  require(!regions.empty(), "make_problem: no RIS regions");
  require(!model.beta_grid.empty(), "make_problem: empty beta grid");
  for (double b : model.beta_grid) {
    if (!(b > 0.0 && b < 1.0)) fail(ErrorCode::invalid_input, "beta grid values must lie in (0, 1)");
  }
  DeploymentProblem p;
  p.scene = &scene;
  p.model = std::move(model);
  p.mode = mode;
  p.standoff = standoff;
  for (const auto& region : regions) {
    require(!region.patches.empty() && !region.covered_cells.empty(), "make_problem: empty region");
    RisSite site;
    site.region = region;
    site.face_id = region.patches.front().face_id;
    for (const auto& patch : region.patches) {
      require(patch.face_id == site.face_id, "make_problem: a region must lie on one face");
    }
    for (int c : region.covered_cells) site.ue_centers.push_back(ue_grid.cells.at(static_cast<std::size_t>(c)).center);
    const double az = scene.face(site.face_id).azimuth();
    site.bounds = {p.model.theta_lo, p.model.theta_hi, az - p.model.psi_half_width, az + p.model.psi_half_width};
    p.sites.push_back(std::move(site));
  }
  if (senses(mode)) {
    p.uav_centers = uav_grid.centers();
    require(!p.uav_centers.empty(), "make_problem: sensing needs at least one UAV cell");
    const double noise = p.model.link.noise_psd_w();
    for (std::size_t u = 0; u < p.uav_centers.size(); ++u) {
      const double g = bs_target_gain(scene, p.model, p.uav_centers[u]);
      if (!(g > 0.0)) {
        fail(ErrorCode::unreachable_targets, "UAV cell " + std::to_string(u) + " has no path to the BS");
      }
      SensingPath path;
      path.coeff = p.model.rcs * g;
      const CrbPair ref = fim(p.model.ofdm, path, noise, p.model.moments);
      const auto& thr = p.model.thresholds;
      const auto w0 = minimum_feasible_weight([&](double w) {
        return ref.range_crb / w <= thr.range_crb_max && ref.velocity_crb / w <= thr.velocity_crb_max;
      });
      if (!w0) {
        fail(ErrorCode::infeasible_power,
             "UAV cell " + std::to_string(u) + ": direct-path CRB misses the thresholds at full power");
      }
      p.direct_crb_ref.push_back(ref);
      p.omega0.push_back(*w0);
    }
  }
  return p;
}

/// Reference quantities of one RIS at one position (M_ref cells, unit weights).
struct RisReference {
  Vec3 position = Vec3::Zero();
  Orientation orientation;
  bool bs_reachable = false;
  PathRecord bs_path;
  std::vector<PathRecord> ue_paths;
  std::vector<bool> ue_reachable;
  std::vector<double> gamma_ref;
  double gamma_ref_worst = 0.0;
  std::vector<PathRecord> uav_paths;
  std::vector<bool> uav_reachable;
  std::vector<CrbPair> crb_ref;
  double coverage_fraction = 0.0;
};

inline RisReference evaluate_reference(const DeploymentProblem& p, std::size_t n, const Vec3& pos) {
  const Scene& scene = *p.scene;
  const SystemModel& m = p.model;
  const RisSite& site = p.sites.at(n);
  RisReference r;
  r.position = pos;
  const std::size_t nk = site.ue_centers.size();
  const std::size_t nu = p.uav_centers.size();
  r.ue_paths.resize(nk);
  r.ue_reachable.assign(nk, false);
  r.gamma_ref.assign(nk, 0.0);
  r.uav_paths.resize(nu);
  r.uav_reachable.assign(nu, false);
  r.crb_ref.resize(nu);

  const auto bs_paths = enumerate_paths(scene, m.prop, scene.bs_position(), pos);
  if (bs_paths.empty()) return r;
  r.bs_path = dominant_path(bs_paths);
  r.bs_reachable = true;

  OrientationTargets targets;
  targets.to_bs = r.bs_path.arrive_dir;
  targets.max_angle = m.max_reflection_angle;
  std::vector<bool> ue_has_path(nk, false), uav_has_path(nu, false);
  for (std::size_t k = 0; k < nk; ++k) {
    const auto paths = enumerate_paths(scene, m.prop, pos, site.ue_centers[k]);
    if (paths.empty()) continue;
    r.ue_paths[k] = dominant_path(paths);
    ue_has_path[k] = true;
    targets.to_ue.push_back(r.ue_paths[k].depart_dir);
  }
  for (std::size_t u = 0; u < nu; ++u) {
    const auto paths = enumerate_paths(scene, m.prop, pos, p.uav_centers[u]);
    if (paths.empty()) continue;
    r.uav_paths[u] = dominant_path(paths);
    uav_has_path[u] = true;
    targets.to_uav.push_back(r.uav_paths[u].depart_dir);
  }

  if (p.mode == Mode::passive_orientation) {
    r.orientation = {0.0, scene.face(site.face_id).azimuth()};
  } else {
    try {
      r.orientation = orientation_search(targets, site.bounds, m.orientation_step);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::unreachable_targets) throw;
      return r;
    }
  }

  const double lambda = m.wavelength();
  const double area_ref = m.unit_area() * m.m_ref;
  const double q = m.quantization_factor();
  const double theta_b = local_direction(r.orientation, r.bs_path.arrive_dir).boresight;
  if (!(theta_b < m.max_reflection_angle)) return r;
  const double alpha_bn2 = r.bs_path.attenuation * r.bs_path.attenuation;
  const double bs_gain = bs_beam_gain(m.bs_array, r.bs_path.depart_dir);
  const double noise = m.link.noise_power_w();
  const double pt = m.link.tx_power_w();

  double worst = std::numeric_limits<double>::infinity();
  std::size_t reached = 0;
  for (std::size_t k = 0; k < nk; ++k) {
    if (!ue_has_path[k]) continue;
    const PathRecord& path = r.ue_paths[k];
    const double theta_k = local_direction(r.orientation, path.depart_dir).boresight;
    if (!(theta_k < m.max_reflection_angle)) continue;
    const double gc = effective_ris_gain(m.efficiency_comm, theta_b, theta_k, area_ref, lambda).value;
    if (!(gc > 0.0)) continue;
    const double gk = element_gain(m.ue_pattern, angles_from_local(path.arrive_dir));
    const double alpha_nk2 = path.attenuation * path.attenuation;
    r.gamma_ref[k] = pt * bs_gain * alpha_bn2 * alpha_nk2 * gk * gc * q / noise;
    r.ue_reachable[k] = true;
    worst = std::min(worst, r.gamma_ref[k]);
    ++reached;
  }
  r.gamma_ref_worst = reached > 0 ? worst : 0.0;
  r.coverage_fraction = nk > 0 ? static_cast<double>(reached) / static_cast<double>(nk) : 0.0;

  const double psd = m.link.noise_psd_w();
  for (std::size_t u = 0; u < nu; ++u) {
    if (!uav_has_path[u]) continue;
    const PathRecord& path = r.uav_paths[u];
    const double theta_u = local_direction(r.orientation, path.depart_dir).boresight;
    if (!(theta_u < m.max_reflection_angle)) continue;
    const double gs = effective_ris_gain(m.efficiency_sense, theta_b, theta_u, area_ref, lambda).value;
    if (!(gs > 0.0)) continue;
    const double direct = bs_target_gain(scene, m, p.uav_centers[u]);
    const double alpha_nu2 = path.attenuation * path.attenuation;
    const double ris_leg = alpha_nu2 * alpha_bn2 * bs_gain * gs * q;
    SensingPath sp;
    sp.coeff = std::sqrt(4.0 * m.rcs * m.rcs * direct * ris_leg);
    r.crb_ref[u] = fim(m.ofdm, sp, psd, m.moments);
    r.uav_reachable[u] = true;
  }
  return r;
}

struct Step1Result {
  double objective = 0.0;
  std::vector<Vec3> positions;
  std::vector<Orientation> orientations;
  std::vector<RisReference> references;
  /// Rows are UAV cells (one row in comm-only mode), columns are RISs.
  Eigen::MatrixXd beta_per_uav;
  /// Column 0 is ω_0, column n+1 is ω_n.
  Eigen::MatrixXd omega_per_uav;
  Eigen::MatrixXd c_per_uav;
  Eigen::MatrixXd area_per_uav;
  std::vector<RisSize> sizes;
  std::vector<double> coverage_fraction;
};

inline std::string describe_position(std::size_t n, const Vec3& p) {
  return "RIS " + std::to_string(n) + " at (" + std::to_string(p.x()) + ", " + std::to_string(p.y()) +
         ", " + std::to_string(p.z()) + ")";
}

inline Step1Result step1_evaluate(const DeploymentProblem& p, const std::vector<Vec3>& positions) {
  const std::size_t n_ris = p.sites.size();
  require(positions.size() == n_ris, "step1_evaluate: one position per RIS");
  const SystemModel& m = p.model;
  Step1Result out;
  out.positions = positions;
  for (std::size_t n = 0; n < n_ris; ++n) {
    RisReference ref = evaluate_reference(p, n, positions[n]);
    const bool passive = p.mode == Mode::passive_orientation;
    const bool all_ue = std::all_of(ref.ue_reachable.begin(), ref.ue_reachable.end(), [](bool b) { return b; });
    const bool all_uav = std::all_of(ref.uav_reachable.begin(), ref.uav_reachable.end(), [](bool b) { return b; });
    if (!ref.bs_reachable) {
      fail(ErrorCode::unreachable_targets, describe_position(n, positions[n]) + " has no path to the BS");
    }
    if (!all_uav) {
      fail(ErrorCode::unreachable_targets, describe_position(n, positions[n]) + " cannot illuminate every UAV cell");
    }
    if (!(ref.gamma_ref_worst > 0.0) || (!passive && !all_ue)) {
      fail(ErrorCode::unreachable_targets, describe_position(n, positions[n]) + " cannot reach every assigned UE cell");
    }
    out.orientations.push_back(ref.orientation);
    out.coverage_fraction.push_back(ref.coverage_fraction);
    out.references.push_back(std::move(ref));
  }

  std::vector<double> areas;
  for (const auto& s : p.sites) areas.push_back(s.region.coverage_area);
  const double unit_area = m.unit_area();
  const bool sensing = senses(p.mode);
  const std::size_t rows = sensing ? p.uav_centers.size() : 1;
  const std::size_t nb = m.beta_grid.size();
  out.beta_per_uav.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n_ris));
  out.omega_per_uav.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n_ris + 1));
  out.c_per_uav.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n_ris));
  out.area_per_uav.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n_ris));

  for (std::size_t u = 0; u < rows; ++u) {
    const auto ri = static_cast<Eigen::Index>(u);
    const double w0 = sensing ? p.omega0[u] : 0.0;
    // c[n][b]: constraint constant of RIS n at beta_grid[b].
    std::vector<std::vector<double>> c(n_ris);
    for (std::size_t n = 0; n < n_ris; ++n) {
      const auto& ref = out.references[n];
      if (!sensing) {
        c[n].push_back(comm_only_constants(ref.gamma_ref_worst, m.thresholds).c_max);
        continue;
      }
      for (double b : m.beta_grid) {
        c[n].push_back(constraint_constants(ref.gamma_ref_worst, ref.crb_ref[u], m.thresholds, b).c_max);
      }
    }
    const std::size_t choices = sensing ? nb : 1;
    double tuples = 1.0;
    for (std::size_t n = 0; n < n_ris; ++n) tuples *= static_cast<double>(choices);
    std::vector<std::size_t> best_idx(n_ris, 0);
    if (tuples <= 1e5) {
      std::vector<std::size_t> idx(n_ris, 0);
      double best_e = std::numeric_limits<double>::infinity();
      std::vector<double> cv(n_ris);
      for (;;) {
        for (std::size_t n = 0; n < n_ris; ++n) cv[n] = c[n][idx[n]];
        const Eigen::VectorXd w = kkt_power_allocation(cv, areas, w0);
        const double e = p1_objective(cv, areas, w, unit_area, m.m_ref);
        if (e < best_e) {
          best_e = e;
          best_idx = idx;
        }
        std::size_t d = 0;
        while (d < n_ris && ++idx[d] == choices) idx[d++] = 0;
        if (d == n_ris) break;
      }
    } else {
      // The optimal objective is increasing in every c_n, so the tuple separates.
      for (std::size_t n = 0; n < n_ris; ++n) {
        best_idx[n] = static_cast<std::size_t>(std::min_element(c[n].begin(), c[n].end()) - c[n].begin());
      }
    }
    std::vector<double> cv(n_ris);
    for (std::size_t n = 0; n < n_ris; ++n) cv[n] = c[n][best_idx[n]];
    const Eigen::VectorXd w = kkt_power_allocation(cv, areas, w0);
    out.omega_per_uav(ri, 0) = w0;
    for (std::size_t n = 0; n < n_ris; ++n) {
      const auto ci = static_cast<Eigen::Index>(n);
      out.beta_per_uav(ri, ci) = sensing ? m.beta_grid[best_idx[n]] : 1.0;
      out.omega_per_uav(ri, ci + 1) = w[ci];
      out.c_per_uav(ri, ci) = cv[n];
      out.area_per_uav(ri, ci) = ris_size(cv[n], w[ci], unit_area, m.m_ref).area;
    }
  }

  out.objective = 0.0;
  for (std::size_t n = 0; n < n_ris; ++n) {
    const auto ci = static_cast<Eigen::Index>(n);
    Eigen::Index worst = 0;
    out.area_per_uav.col(ci).maxCoeff(&worst);
    out.sizes.push_back(ris_size(out.c_per_uav(worst, ci), out.omega_per_uav(worst, ci + 1), unit_area, m.m_ref));
    out.objective += out.sizes.back().area / areas[n];
  }
  return out;
}

/// Ẽ, or a large penalty growing with the number of RISs that cannot serve their targets.
inline double step1_objective(const DeploymentProblem& p, const std::vector<Vec3>& positions) {
  try {
    return step1_evaluate(p, positions).objective;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::unreachable_targets && e.code() != ErrorCode::unobservable_path) throw;
    std::size_t bad = 0;
    for (std::size_t n = 0; n < p.sites.size(); ++n) {
      try {
        const auto ref = evaluate_reference(p, n, positions[n]);
        const bool ok = ref.bs_reachable && ref.gamma_ref_worst > 0.0 &&
                        std::all_of(ref.uav_reachable.begin(), ref.uav_reachable.end(), [](bool b) { return b; }) &&
                        (p.mode == Mode::passive_orientation ||
                         std::all_of(ref.ue_reachable.begin(), ref.ue_reachable.end(), [](bool b) { return b; }));
        if (!ok) ++bad;
      } catch (const Error&) {
        ++bad;
      }
    }
    return 1e6 * (1.0 + static_cast<double>(bad));
  }
}

// ---------------------------------------------------------------------------------------------
// Nelder-Mead over blocks of coordinates (one block per RIS).

using Block = Eigen::VectorXd;
using Vertex = std::vector<Block>;

struct SimplexState {
  std::vector<Vertex> points;
  std::vector<double> objective_values;
  int iteration = 0;
  double d_min = 0.3;
};

struct NelderMeadOptions {
  double d_min = 0.3;
  int max_iterations = 500;
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double inside_contraction = -0.5;
  double shrink = 0.5;
  int threads = 1;
};

struct SpreadStats {
  double mean = 0.0;
  double stddev = 0.0;
  double max = 0.0;
};

struct TraceRecord {
  int iteration = 0;
  double best = 0.0;
  std::vector<SpreadStats> spread;
};

struct NelderMeadOutcome {
  Vertex best;
  double best_value = 0.0;
  SimplexState state;
  std::vector<TraceRecord> trace;
  bool converged = false;
  int evaluations = 0;
};

/// (1 + μ)·centroid − μ·worst, block by block.
inline Vertex nm_combine(const Vertex& centroid, const Vertex& worst, double mu) {
  require(centroid.size() == worst.size(), "nm_combine: block count mismatch");
  Vertex out(centroid.size());
  for (std::size_t i = 0; i < centroid.size(); ++i) out[i] = (1.0 + mu) * centroid[i] - mu * worst[i];
  return out;
}

/// Pairwise-distance statistics of each block across the simplex vertices.
inline std::vector<SpreadStats> simplex_spread(const std::vector<Vertex>& points) {
  if (points.empty()) return {};
  std::vector<SpreadStats> out(points.front().size());
  for (std::size_t b = 0; b < out.size(); ++b) {
    std::vector<double> d;
    for (std::size_t i = 0; i < points.size(); ++i) {
      for (std::size_t j = i + 1; j < points.size(); ++j) d.push_back((points[i][b] - points[j][b]).norm());
    }
    if (d.empty()) continue;
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    double var = 0.0;
    for (double x : d) var += (x - mean) * (x - mean);
    out[b] = {mean, std::sqrt(var / static_cast<double>(d.size())), *std::max_element(d.begin(), d.end())};
  }
  return out;
}

inline double max_spread(const std::vector<SpreadStats>& s) {
  double m = 0.0;
  for (const auto& x : s) m = std::max(m, x.max);
  return m;
}

template <class Objective, class Projector>
NelderMeadOutcome nelder_mead(SimplexState state, Objective&& objective, Projector&& project,
                              const NelderMeadOptions& opt) {
  require(state.points.size() >= 2, "nelder_mead: need at least two vertices");
  require(opt.max_iterations >= 0 && opt.d_min > 0.0, "nelder_mead: invalid options");
  NelderMeadOutcome out;
  state.d_min = opt.d_min;
  const std::size_t nv = state.points.size();
  for (auto& v : state.points) v = project(v);

  auto evaluate_all = [&](std::size_t from) {
    std::vector<double> vals(nv - from);
    parallel_for(nv - from, opt.threads, [&](std::size_t i) { vals[i] = objective(state.points[from + i]); });
    for (std::size_t i = from; i < nv; ++i) state.objective_values[i] = vals[i - from];
    out.evaluations += static_cast<int>(nv - from);
  };
  auto eval = [&](const Vertex& v) {
    ++out.evaluations;
    return objective(v);
  };
  if (state.objective_values.size() != nv) {
    state.objective_values.assign(nv, 0.0);
    evaluate_all(0);
  }
  auto order = [&] {
    std::vector<std::size_t> idx(nv);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return state.objective_values[a] < state.objective_values[b];
    });
    std::vector<Vertex> pts;
    std::vector<double> vals;
    for (std::size_t i : idx) {
      pts.push_back(state.points[i]);
      vals.push_back(state.objective_values[i]);
    }
    state.points = std::move(pts);
    state.objective_values = std::move(vals);
  };

  for (;;) {
    order();
    const auto spread = simplex_spread(state.points);
    out.trace.push_back({state.iteration, state.objective_values.front(), spread});
    if (max_spread(spread) <= opt.d_min) {
      out.converged = true;
      break;
    }
    if (state.iteration >= opt.max_iterations) break;
    ++state.iteration;

    const Vertex& worst = state.points.back();
    Vertex centroid = state.points.front();
    for (auto& b : centroid) b.setZero();
    for (std::size_t i = 0; i + 1 < nv; ++i) {
      for (std::size_t b = 0; b < centroid.size(); ++b) centroid[b] += state.points[i][b];
    }
    for (auto& b : centroid) b /= static_cast<double>(nv - 1);

    const double f_best = state.objective_values.front();
    const double f_second = state.objective_values[nv - 2];
    const double f_worst = state.objective_values.back();
    const Vertex xr = project(nm_combine(centroid, worst, opt.reflection));
    const double fr = eval(xr);
    auto replace_worst = [&](const Vertex& v, double f) {
      state.points.back() = v;
      state.objective_values.back() = f;
    };
    if (fr < f_best) {
      const Vertex xe = project(nm_combine(centroid, worst, opt.expansion));
      const double fe = eval(xe);
      if (fe < fr) {
        replace_worst(xe, fe);
      } else {
        replace_worst(xr, fr);
      }
      continue;
    }
    if (fr < f_second) {
      replace_worst(xr, fr);
      continue;
    }
    if (fr < f_worst) {
      const Vertex xc = project(nm_combine(centroid, worst, opt.contraction));
      const double fc = eval(xc);
      if (fc <= fr) {
        replace_worst(xc, fc);
        continue;
      }
    } else {
      const Vertex xc = project(nm_combine(centroid, worst, opt.inside_contraction));
      const double fc = eval(xc);
      if (fc < f_worst) {
        replace_worst(xc, fc);
        continue;
      }
    }
    const Vertex& best = state.points.front();
    for (std::size_t i = 1; i < nv; ++i) {
      Vertex v(best.size());
      for (std::size_t b = 0; b < best.size(); ++b) {
        v[b] = best[b] + opt.shrink * (state.points[i][b] - best[b]);
      }
      state.points[i] = project(v);
    }
    evaluate_all(1);
  }
  out.best = state.points.front();
  out.best_value = state.objective_values.front();
  out.state = std::move(state);
  return out;
}

// ---------------------------------------------------------------------------------------------
// Deployment search in (u, z) coordinates on each RIS's wall face.

inline Vec2 to_face_coords(const Face& f, const Vec3& p) {
  return Vec2((p - f.origin).dot(f.u_axis), p.z());
}

inline Vec3 from_face_coords(const DeploymentProblem& p, std::size_t n, const Vec2& uz) {
  const Face& f = p.scene->face(p.sites[n].face_id);
  return f.point(uz.x(), uz.y()) + p.standoff * f.normal;
}

/// Nearest point of the RIS's patches in face coordinates.
inline Vec2 project_to_region(const RisSite& site, const Vec2& uz) {
  Vec2 best = uz;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& patch : site.region.patches) {
    const Vec2 q(std::clamp(uz.x(), patch.u0, patch.u1), std::clamp(uz.y(), patch.z0, patch.z1));
    const double d = (q - uz).norm();
    if (d < best_d) {
      best_d = d;
      best = q;
    }
  }
  return best;
}

inline std::vector<Vec3> vertex_positions(const DeploymentProblem& p, const Vertex& v) {
  std::vector<Vec3> out;
  for (std::size_t n = 0; n < v.size(); ++n) out.push_back(from_face_coords(p, n, Vec2(v[n][0], v[n][1])));
  return out;
}

inline Vertex sample_vertex(const DeploymentProblem& p, std::mt19937_64& rng) {
  Vertex v;
  for (std::size_t n = 0; n < p.sites.size(); ++n) {
    const Vec3 pt = sample_region_point(*p.scene, p.sites[n].region, p.standoff, rng);
    const Vec2 uz = to_face_coords(p.scene->face(p.sites[n].face_id), pt);
    v.push_back(Block(uz));
  }
  return v;
}

/// `simplex_size` + 1 random position sets (M_s defaults to 2N).
inline SimplexState initial_simplex(const DeploymentProblem& p, std::uint64_t seed, int simplex_size = 0) {
  const int ms = simplex_size > 0 ? simplex_size : 2 * static_cast<int>(p.sites.size());
  std::mt19937_64 rng(seed);
  SimplexState s;
  for (int i = 0; i <= ms; ++i) s.points.push_back(sample_vertex(p, rng));
  return s;
}

struct OptimizationResult {
  Mode mode = Mode::full_isac;
  Step1Result step1;
  std::vector<TraceRecord> trace;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
};

inline OptimizationResult nelder_mead_run(const SimplexState& initial, const DeploymentProblem& p,
                                          const NelderMeadOptions& opt) {
  auto objective = [&](const Vertex& v) { return step1_objective(p, vertex_positions(p, v)); };
  auto project = [&](const Vertex& v) {
    Vertex out(v.size());
    for (std::size_t n = 0; n < v.size(); ++n) out[n] = Block(project_to_region(p.sites[n], Vec2(v[n][0], v[n][1])));
    return out;
  };
  NelderMeadOutcome nm = nelder_mead(initial, objective, project, opt);
  OptimizationResult r;
  r.mode = p.mode;
  r.trace = std::move(nm.trace);
  r.converged = nm.converged;
  r.iterations = nm.state.iteration;
  r.evaluations = nm.evaluations;
  r.step1 = step1_evaluate(p, vertex_positions(p, nm.best));
  return r;
}

/// Region sample minimizing FSPL(BS→RIS) + mean FSPL(RIS→cell), per RIS.
inline std::vector<Vec3> min_pathloss_positions(const DeploymentProblem& p, double step) {
  const double lambda = p.model.wavelength();
  std::vector<Vec3> out;
  for (const auto& site : p.sites) {
    double best = std::numeric_limits<double>::infinity();
    Vec3 best_pt = Vec3::Zero();
    for (const auto& patch : site.region.patches) {
      for (const Vec3& pt : patch_samples(*p.scene, patch, step, p.standoff)) {
        double mean = 0.0;
        for (const Vec3& c : site.ue_centers) mean += fspl_db((c - pt).norm(), lambda);
        mean /= static_cast<double>(site.ue_centers.size());
        const double cost = fspl_db((pt - p.scene->bs_position()).norm(), lambda) + mean;
        if (cost < best) {
          best = cost;
          best_pt = pt;
        }
      }
    }
    out.push_back(best_pt);
  }
  return out;
}

/// Runs the mode's position search and returns the full step-1 output at the chosen positions.
inline OptimizationResult optimize(const DeploymentProblem& p, const NelderMeadOptions& opt,
                                   std::uint64_t seed, int simplex_size = 0, double sample_step = 0.5) {
  if (p.mode == Mode::pathloss_baseline) {
    OptimizationResult r;
    r.mode = p.mode;
    r.step1 = step1_evaluate(p, min_pathloss_positions(p, sample_step));
    r.trace.push_back({0, r.step1.objective, std::vector<SpreadStats>(p.sites.size())});
    r.converged = true;
    r.evaluations = 1;
    return r;
  }
  return nelder_mead_run(initial_simplex(p, seed, simplex_size), p, opt);
}

/// Best Ẽ over uniform random position sets.
inline double random_search(const DeploymentProblem& p, int samples, std::uint64_t seed, int threads = 1) {
  std::mt19937_64 rng(seed);
  std::vector<Vertex> vs;
  vs.reserve(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) vs.push_back(sample_vertex(p, rng));
  std::vector<double> vals(vs.size());
  parallel_for(vs.size(), threads, [&](std::size_t i) { vals[i] = step1_objective(p, vertex_positions(p, vs[i])); });
  return vals.empty() ? std::numeric_limits<double>::infinity() : *std::min_element(vals.begin(), vals.end());
}

}  // namespace risplan
