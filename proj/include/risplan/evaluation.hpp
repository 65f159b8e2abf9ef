#pragma once

#include "risplan/optimizer.hpp"
#include "risplan/radar.hpp"

#include <limits>
#include <vector>

namespace risplan {

/// Sized panel of RIS n as deployed: square, ceil(side / D) cells per side.
inline RisPanel deployed_panel(const DeploymentProblem& p, const Step1Result& s, std::size_t n,
                               double efficiency) {
  RisPanel panel;
  panel.center = s.positions.at(n);
  panel.orientation = s.orientations.at(n);
  panel.geom = UpaGeometry::square(s.sizes.at(n).cells_per_side, p.model.wavelength());
  panel.efficiency = efficiency;
  return panel;
}

/// Matched BS beam and channel toward a UAV cell over all BS→UAV paths.
struct UavLink {
  CRowVec channel;
  CVec beam;
};

inline UavLink uav_link(const DeploymentProblem& p, const Vec3& uav) {
  const auto paths = enumerate_paths(*p.scene, p.model.prop, p.scene->bs_position(), uav);
  if (paths.empty()) fail(ErrorCode::no_path, "no BS path to the UAV");
  UavLink l;
  l.channel = direct_channel(paths, p.model.bs_array, GainPattern::isotropic(0.0));
  l.beam = svd_beamformer(l.channel).vectors.col(0);
  return l;
}

/// One (RIS, UE cell, UAV cell) triple evaluated through the explicit channel stack.
struct ClosureRecord {
  int ris = 0;
  int cell = 0;
  int uav = -1;
  double beta = 1.0;
  double omega = 1.0;
  double snr_model = 0.0;
  double snr_explicit = 0.0;
  double range_crb_model = 0.0;
  double range_crb_explicit = 0.0;
  double velocity_crb_model = 0.0;
  double velocity_crb_explicit = 0.0;
  cdouble sensing_coeff{0.0, 0.0};
};

struct ClosureSummary {
  std::size_t records = 0;
  /// min over records of SNR / γ^tr, dB.
  double worst_snr_margin_db = std::numeric_limits<double>::infinity();
  /// max over records of CRB / threshold, dB (range and velocity).
  double worst_range_crb_excess_db = -std::numeric_limits<double>::infinity();
  double worst_velocity_crb_excess_db = -std::numeric_limits<double>::infinity();
  /// explicit / accounting, dB.
  double snr_gap_min_db = std::numeric_limits<double>::infinity();
  double snr_gap_mean_db = 0.0;
  double snr_gap_max_db = -std::numeric_limits<double>::infinity();
  double crb_gap_min_db = std::numeric_limits<double>::infinity();
  double crb_gap_mean_db = 0.0;
  double crb_gap_max_db = -std::numeric_limits<double>::infinity();
};

struct ClosureReport {
  std::vector<ClosureRecord> records;
  ClosureSummary summary;
  /// Applied phase profile per RIS for the first (cell, UAV) pair it serves.
  std::vector<RisPhaseProfile> exemplary_profiles;
};

/// Re-evaluates a deployment with the sized panels, dual-beam phases and L-bit quantization.
inline ClosureReport evaluate_closure(const DeploymentProblem& p, const Step1Result& s) {
  const SystemModel& m = p.model;
  const Vec3 bs = p.scene->bs_position();
  const double pt = m.link.tx_power_w();
  const double noise = m.link.noise_power_w();
  const double psd = m.link.noise_psd_w();
  const bool sensing = senses(p.mode);
  const std::size_t n_uav = sensing ? p.uav_centers.size() : 1;

  std::vector<UavLink> uav_links;
  if (sensing) {
    for (const Vec3& u : p.uav_centers) uav_links.push_back(uav_link(p, u));
  }

  ClosureReport report;
  std::vector<std::vector<ClosureRecord>> per_ris(p.sites.size());
  report.exemplary_profiles.resize(p.sites.size());
  parallel_for(p.sites.size(), p.threads, [&](std::size_t n) {
    const RisReference& ref = s.references.at(n);
    const RisPanel panel_c = deployed_panel(p, s, n, m.efficiency_comm);
    const RisPanel panel_s = deployed_panel(p, s, n, m.efficiency_sense);
    const double scale = static_cast<double>(panel_c.geom.size()) / m.m_ref;
    const CVec g_c = ris_incident_field(panel_c, bs, ref.bs_path);
    const CVec g_s = std::pow(m.efficiency_sense / m.efficiency_comm, 0.25) * g_c;
    const CRowVec bs_resp = array_response(m.bs_array, ref.bs_path.depart_dir);
    const CVec w_n = svd_beamformer(bs_resp).vectors.col(0);
    const auto dist = distance_phases(panel_c.cell_positions(), bs, m.wavelength());

    for (std::size_t k = 0; k < ref.ue_paths.size(); ++k) {
      if (!ref.ue_reachable[k]) continue;
      const PathRecord& ue_path = ref.ue_paths[k];
      const double gk = element_gain(m.ue_pattern, angles_from_local(ue_path.arrive_dir));
      const CRowVec dep_k = ris_departure_field(panel_c, ue_path, gk);
      const DirectionAngles ang_k = local_direction(panel_c.orientation, ue_path.depart_dir).angles;
      for (std::size_t u = 0; u < n_uav; ++u) {
        const auto r = static_cast<Eigen::Index>(u);
        ClosureRecord rec;
        rec.ris = static_cast<int>(n);
        rec.cell = p.sites[n].region.covered_cells.at(k);
        rec.uav = sensing ? static_cast<int>(u) : -1;
        rec.beta = s.beta_per_uav(r, static_cast<Eigen::Index>(n));
        rec.omega = s.omega_per_uav(r, static_cast<Eigen::Index>(n) + 1);

        RisPhaseProfile profile;
        if (sensing) {
          const PathRecord& uav_path = ref.uav_paths.at(u);
          const DirectionAngles ang_u = local_direction(panel_s.orientation, uav_path.depart_dir).angles;
          profile = dual_beam_phases(panel_c.geom, ang_k, ang_u, WeightFactorPair::from_comm(rec.beta), dist);
        } else {
          profile = dual_beam_phases(panel_c.geom, ang_k, ang_k, WeightFactorPair{1.0, 0.0}, dist);
        }
        profile = quantize(std::move(profile), m.bits);
        const CVec phi = profile.diagonal();
        if (k == 0 && u == 0) report.exemplary_profiles[n] = profile;

        const FactoredCascade comm{g_c, bs_resp, dep_k, phi};
        rec.snr_explicit = snr_cascaded(comm, w_n, rec.omega * pt, noise);
        rec.snr_model = rec.beta * rec.omega * scale * scale * ref.gamma_ref[k];

        if (sensing) {
          const CRowVec dep_u = ris_departure_field(panel_s, ref.uav_paths.at(u), 1.0);
          const FactoredCascade sense{g_s, bs_resp, dep_u, phi};
          const auto ch = ris_sensing_channels(uav_links[u].channel, sense.row());
          rec.sensing_coeff = sensing_coefficient(ch, uav_links[u].beam, std::sqrt(rec.omega) * w_n, m.rcs);
          SensingPath path;
          path.coeff = rec.sensing_coeff;
          const CrbPair crb = fim(m.ofdm, path, psd, m.moments);
          rec.range_crb_explicit = crb.range_crb;
          rec.velocity_crb_explicit = crb.velocity_crb;
          const CrbPair model = reference_crb_scale(ref.crb_ref.at(u), 1.0 - rec.beta, rec.omega, scale);
          rec.range_crb_model = model.range_crb;
          rec.velocity_crb_model = model.velocity_crb;
        }
        per_ris[n].push_back(rec);
      }
    }
  });
  for (auto& v : per_ris) report.records.insert(report.records.end(), v.begin(), v.end());

  ClosureSummary& sum = report.summary;
  sum.records = report.records.size();
  double snr_gap_total = 0.0, crb_gap_total = 0.0;
  std::size_t crb_count = 0;
  for (const auto& r : report.records) {
    sum.worst_snr_margin_db = std::min(sum.worst_snr_margin_db, linear_to_db(r.snr_explicit / m.thresholds.snr_threshold));
    const double g = linear_to_db(r.snr_explicit / r.snr_model);
    sum.snr_gap_min_db = std::min(sum.snr_gap_min_db, g);
    sum.snr_gap_max_db = std::max(sum.snr_gap_max_db, g);
    snr_gap_total += g;
    if (r.uav >= 0) {
      sum.worst_range_crb_excess_db =
          std::max(sum.worst_range_crb_excess_db, linear_to_db(r.range_crb_explicit / m.thresholds.range_crb_max));
      sum.worst_velocity_crb_excess_db = std::max(
          sum.worst_velocity_crb_excess_db, linear_to_db(r.velocity_crb_explicit / m.thresholds.velocity_crb_max));
      // Positive means the explicit CRB is worse than the accounting predicts.
      const double cg = linear_to_db(r.range_crb_explicit / r.range_crb_model);
      sum.crb_gap_min_db = std::min(sum.crb_gap_min_db, cg);
      sum.crb_gap_max_db = std::max(sum.crb_gap_max_db, cg);
      crb_gap_total += cg;
      ++crb_count;
    }
  }
  if (sum.records > 0) sum.snr_gap_mean_db = snr_gap_total / static_cast<double>(sum.records);
  if (crb_count > 0) sum.crb_gap_mean_db = crb_gap_total / static_cast<double>(crb_count);
  return report;
}

/// Matched-filter SNR of a UE cell served by the BS alone at full power.
inline double bs_only_snr(const Scene& scene, const SystemModel& m, const Vec3& cell) {
  const auto paths = enumerate_paths(scene, m.prop, scene.bs_position(), cell);
  if (paths.empty()) return 0.0;
  const CRowVec h = direct_channel(paths, m.bs_array, m.ue_pattern);
  if (h.squaredNorm() == 0.0) return 0.0;
  return m.link.tx_power_w() * h.squaredNorm() / m.link.noise_power_w();
}

/// Echo paths for one UAV position: the direct echo plus one per RIS.
struct RadarScenario {
  Vec3 uav = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  std::vector<SensingPath> paths;
  std::vector<Vec3> ris_positions;
};

/// Echo coefficients of a sized deployment for a target at `uav`, with the received amplitude
/// scaled by √P_t so that they apply to unit-modulus symbols. Uses the deployed phases of each
/// RIS's first UE cell.
inline RadarScenario radar_scenario(const DeploymentProblem& p, const Step1Result& s,
                                    std::size_t uav_index, const Vec3& velocity) {
  require(senses(p.mode), "radar_scenario: the mode has no sensing");
  const SystemModel& m = p.model;
  const Vec3 bs = p.scene->bs_position();
  const Vec3 uav = p.uav_centers.at(uav_index);
  const auto r = static_cast<Eigen::Index>(uav_index);
  const double amp = std::sqrt(m.link.tx_power_w());
  RadarScenario sc;
  sc.uav = uav;
  sc.velocity = velocity;
  const UavLink link = uav_link(p, uav);
  {
    const auto trip = direct_round_trip(bs, uav, velocity);
    const cdouble coeff = std::sqrt(s.omega_per_uav(r, 0)) *
                          sensing_coefficient(direct_sensing_channels(link.channel), link.beam, link.beam, m.rcs);
    sc.paths.push_back(SensingPath::from_range_velocity(0, trip.range, trip.velocity, m.wavelength(), amp * coeff));
  }
  for (std::size_t n = 0; n < p.sites.size(); ++n) {
    const RisReference& ref = s.references.at(n);
    const RisPanel panel_c = deployed_panel(p, s, n, m.efficiency_comm);
    const RisPanel panel_s = deployed_panel(p, s, n, m.efficiency_sense);
    const CVec g_s = ris_incident_field(panel_s, bs, ref.bs_path);
    const CRowVec bs_resp = array_response(m.bs_array, ref.bs_path.depart_dir);
    const CVec w_n = svd_beamformer(bs_resp).vectors.col(0);
    const auto dist = distance_phases(panel_c.cell_positions(), bs, m.wavelength());
    std::size_t k = 0;
    while (k < ref.ue_reachable.size() && !ref.ue_reachable[k]) ++k;
    require(k < ref.ue_reachable.size(), "radar_scenario: RIS serves no reachable cell");
    const double beta = s.beta_per_uav(r, static_cast<Eigen::Index>(n));
    const double omega = s.omega_per_uav(r, static_cast<Eigen::Index>(n) + 1);
    const auto ang_k = local_direction(panel_c.orientation, ref.ue_paths[k].depart_dir).angles;
    const auto ang_u = local_direction(panel_s.orientation, ref.uav_paths.at(uav_index).depart_dir).angles;
    const CVec phi =
        quantize(dual_beam_phases(panel_c.geom, ang_k, ang_u, WeightFactorPair::from_comm(beta), dist), m.bits)
            .diagonal();
    const CRowVec dep_u = ris_departure_field(panel_s, ref.uav_paths.at(uav_index), 1.0);
    const FactoredCascade cascade{g_s, bs_resp, dep_u, phi};
    const cdouble coeff = sensing_coefficient(ris_sensing_channels(link.channel, cascade.row()), link.beam,
                                              std::sqrt(omega) * w_n, m.rcs);
    const auto trip = ris_round_trip(bs, s.positions[n], uav, velocity);
    sc.paths.push_back(SensingPath::from_range_velocity(static_cast<int>(n) + 1, trip.range, trip.velocity,
                                                        m.wavelength(), amp * coeff));
    sc.ris_positions.push_back(s.positions[n]);
  }
  return sc;
}

}  // namespace risplan
