#pragma once

#include "risplan/arrays.hpp"
#include "risplan/propagation.hpp"

#include <vector>

namespace risplan {

struct LinkBudget {
  double tx_power_dbm = 43.0;
  double noise_psd_dbm_hz = -165.0;
  double bandwidth = 1e9;
  double snr_threshold_db = 20.0;

  double tx_power_w() const { return dbm_to_watt(tx_power_dbm); }
  double noise_psd_w() const { return dbm_to_watt(noise_psd_dbm_hz); }
  /// Full-band noise power.
  double noise_power_w() const {
    require(bandwidth > 0.0, "bandwidth must be > 0");
    return dbm_to_watt(noise_psd_dbm_hz + 10.0 * std::log10(bandwidth));
  }
  double snr_threshold() const { return db_to_linear(snr_threshold_db); }
};

/// Array with its mounting orientation and element pattern.
struct AntennaArray {
  UpaGeometry geom;
  Orientation orientation;
  GainPattern pattern = GainPattern::isotropic(0.0);
};

/// Transmit-side response toward a global unit direction: sqrt(G)·a(θ, ψ)ᵀ.
inline CRowVec array_response(const AntennaArray& array, const Vec3& global_dir) {
  const LocalDirection local = local_direction(array.orientation, global_dir);
  const double gain = element_gain(array.pattern, local.angles);
  return std::sqrt(gain) * steering_vector(array.geom, local.angles).transpose();
}

/// Multipath BS→UE channel. Element gains enter as amplitudes (square roots of power gains).
inline CRowVec direct_channel(const std::vector<PathRecord>& paths, const AntennaArray& bs,
                              const GainPattern& rx_pattern) {
  CRowVec h = CRowVec::Zero(bs.geom.size());
  for (const auto& p : paths) {
    const double rx_gain = element_gain(rx_pattern, angles_from_local(p.arrive_dir));
    h += std::sqrt(rx_gain) * std::polar(p.attenuation, p.phase) * array_response(bs, p.depart_dir);
  }
  return h;
}

struct EffectiveRisGain {
  double value = 0.0;
  double efficiency = 0.0;
  double incidence = 0.0;
  double reflection = 0.0;
  double area = 0.0;
};

inline EffectiveRisGain effective_ris_gain(double efficiency, double incidence, double reflection,
                                           double area_m2, double wavelength) {
  require(incidence >= 0.0 && incidence <= kPi && reflection >= 0.0 && reflection <= kPi,
          "effective_ris_gain: angles must lie in [0, pi]");
  EffectiveRisGain g{0.0, efficiency, incidence, reflection, area_m2};
  if (incidence >= kPi / 2 || reflection >= kPi / 2) return g;
  const double aperture = 4.0 * kPi / (wavelength * wavelength);
  g.value = efficiency * std::cos(incidence) * std::cos(reflection) * area_m2 * area_m2 *
            aperture * aperture;
  return g;
}

inline double snr_direct(const CRowVec& h, const CVec& w, double power, double noise_power) {
  require(h.size() == w.size(), "snr_direct: dimension mismatch");
  require(noise_power > 0.0, "snr_direct: noise power must be > 0");
  return power * std::norm(h.dot(w.conjugate())) / noise_power;
}

/// Unconjugated product h·w.
inline cdouble beam_output(const CRowVec& h, const CVec& w) { return (h * w)(0, 0); }

struct CascadeChannel {
  CMat bs_to_ris;
  CRowVec ris_to_rx;
  CVec ris_phases;
};

inline void check_unit_modulus(const CVec& phases) {
  for (Eigen::Index i = 0; i < phases.size(); ++i) {
    require(std::abs(std::abs(phases[i]) - 1.0) <= 1e-9, "RIS phase entries must be unit-modulus");
  }
}

/// h_{n,k} Φ H_{b,n} as a 1 × M_b row.
inline CRowVec cascade_row(const CascadeChannel& c) {
  require(c.bs_to_ris.rows() == c.ris_to_rx.size() && c.ris_phases.size() == c.ris_to_rx.size(),
          "cascade channel dimensions are inconsistent");
  check_unit_modulus(c.ris_phases);
  CRowVec weighted = c.ris_to_rx.cwiseProduct(c.ris_phases.transpose());
  return weighted * c.bs_to_ris;
}

inline double snr_cascaded(const CascadeChannel& c, const CVec& w, double power,
                           double noise_power) {
  const CRowVec row = cascade_row(c);
  require(row.size() == w.size(), "snr_cascaded: dimension mismatch");
  require(noise_power > 0.0, "snr_cascaded: noise power must be > 0");
  return power * std::norm(beam_output(row, w)) / noise_power;
}

/// Cascade whose BS→RIS matrix is the outer product ris_incident · bs_response.
struct FactoredCascade {
  CVec ris_incident;
  CRowVec bs_response;
  CRowVec ris_to_rx;
  CVec ris_phases;

  /// Scalar RIS combining term h_{n,k} Φ g.
  cdouble ris_term() const {
    require(ris_incident.size() == ris_to_rx.size() && ris_phases.size() == ris_to_rx.size(),
            "cascade channel dimensions are inconsistent");
    return (ris_to_rx.cwiseProduct(ris_phases.transpose()) * ris_incident)(0, 0);
  }
  CRowVec row() const { return ris_term() * bs_response; }
  CascadeChannel dense() const {
    CascadeChannel c;
    c.bs_to_ris = ris_incident * bs_response;
    c.ris_to_rx = ris_to_rx;
    c.ris_phases = ris_phases;
    return c;
  }
};

inline double snr_cascaded(const FactoredCascade& c, const CVec& w, double power,
                           double noise_power) {
  check_unit_modulus(c.ris_phases);
  require(c.bs_response.size() == w.size(), "snr_cascaded: dimension mismatch");
  require(noise_power > 0.0, "snr_cascaded: noise power must be > 0");
  return power * std::norm(beam_output(c.row(), w)) / noise_power;
}

/// Square RIS panel centered at `center`.
struct RisPanel {
  Vec3 center = Vec3::Zero();
  Orientation orientation;
  UpaGeometry geom;
  double efficiency = 0.3;

  Vec3 cell_position(int m) const {
    return center + rotation_matrix(orientation) * geom.centered_offset(m);
  }
  std::vector<Vec3> cell_positions() const {
    std::vector<Vec3> out;
    out.reserve(static_cast<std::size_t>(geom.size()));
    const Mat3 r = rotation_matrix(orientation);
    for (int m = 0; m < geom.size(); ++m) out.push_back(center + r * geom.centered_offset(m));
    return out;
  }
};

/// Per-cell field amplitude. M coherent cells reproduce the effective gain of an M·A_u panel.
inline double ris_cell_amplitude(double efficiency, double boresight_angle, double unit_area,
                                 double wavelength) {
  const double c = std::cos(boresight_angle);
  if (c <= 0.0) return 0.0;
  return std::pow(efficiency, 0.25) *
         std::sqrt(c * 4.0 * kPi * unit_area / (wavelength * wavelength));
}

/// Incident field over the panel for a path arriving from `source`, with exact per-cell ranges
/// relative to the panel center. `path.arrive_dir` gives the incidence angle.
inline CVec ris_incident_field(const RisPanel& panel, const Vec3& source, const PathRecord& path) {
  const double lambda = panel.geom.wavelength;
  const double k = wavenumber_of(lambda);
  const double theta = local_direction(panel.orientation, path.arrive_dir).boresight;
  const double amp = ris_cell_amplitude(panel.efficiency, theta,
                                        panel.geom.spacing * panel.geom.spacing, lambda);
  const double ref = (panel.center - source).norm();
  const cdouble common = std::polar(path.attenuation * amp, path.phase);
  CVec g(panel.geom.size());
  const auto cells = panel.cell_positions();
  for (int m = 0; m < panel.geom.size(); ++m) {
    g[m] = common * std::polar(1.0, -k * ((cells[static_cast<std::size_t>(m)] - source).norm() - ref));
  }
  return g;
}

/// Far-field response from the panel along a departing path, phase-referenced to the center.
inline CRowVec ris_departure_field(const RisPanel& panel, const PathRecord& path,
                                   double rx_gain_linear) {
  const double lambda = panel.geom.wavelength;
  const LocalDirection local = local_direction(panel.orientation, path.depart_dir);
  const double amp = ris_cell_amplitude(panel.efficiency, local.boresight,
                                        panel.geom.spacing * panel.geom.spacing, lambda);
  const Vec3 center_offset = panel.geom.centered_offset(0) - panel.geom.element_offset(0);
  const double recenter = -wavenumber_of(lambda) * (-center_offset).dot(local.angles.unit());
  const cdouble common =
      std::polar(path.attenuation * amp * std::sqrt(rx_gain_linear), path.phase + recenter);
  return common * steering_vector(panel.geom, local.angles).transpose();
}

}  // namespace risplan
