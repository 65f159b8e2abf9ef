#pragma once

#include "risplan/arrays.hpp"

#include <ostream>
#include <vector>

namespace risplan {

struct RisPhaseProfile {
  std::vector<double> ideal_phases;
  std::vector<double> quantized_phases;
  int bits = 0;

  /// Unit-modulus diagonal of the applied profile (quantized when available).
  CVec diagonal() const {
    const auto& src = quantized_phases.empty() ? ideal_phases : quantized_phases;
    CVec out(static_cast<Eigen::Index>(src.size()));
    for (std::size_t i = 0; i < src.size(); ++i) out[static_cast<Eigen::Index>(i)] = std::polar(1.0, src[i]);
    return out;
  }
};

struct WeightFactorPair {
  double beta_comm = 1.0;
  double beta_sense = 0.0;

  static WeightFactorPair from_comm(double beta_comm) {
    require(beta_comm >= 0.0 && beta_comm <= 1.0, "beta must lie in [0, 1]");
    return {beta_comm, 1.0 - beta_comm};
  }
};

/// Phases that undo the BS→cell range differences, referenced to the first cell.
inline std::vector<double> distance_phases(const std::vector<Vec3>& ris_cells,
                                           const Vec3& bs_position, double wavelength) {
  std::vector<double> out(ris_cells.size(), 0.0);
  if (ris_cells.empty()) return out;
  const double k = wavenumber_of(wavelength);
  const double ref = (ris_cells.front() - bs_position).norm();
  for (std::size_t m = 0; m < ris_cells.size(); ++m) {
    out[m] = k * ((ris_cells[m] - bs_position).norm() - ref);
  }
  return out;
}

/// Weighted two-beam steering: angle(√β_k·conj(a_ue) + √β_u·conj(a_uav)) plus distance phases.
inline RisPhaseProfile dual_beam_phases(const UpaGeometry& geom, const DirectionAngles& dir_ue,
                                        const DirectionAngles& dir_uav,
                                        const WeightFactorPair& weights,
                                        const std::vector<double>& distance) {
  require(static_cast<int>(distance.size()) == geom.size(),
          "dual_beam_phases: distance phase length must equal the cell count");
  const CVec a_ue = steering_vector(geom, dir_ue);
  const CVec a_uav = steering_vector(geom, dir_uav);
  const double wk = std::sqrt(weights.beta_comm);
  const double wu = std::sqrt(weights.beta_sense);
  RisPhaseProfile out;
  out.ideal_phases.resize(distance.size());
  for (int m = 0; m < geom.size(); ++m) {
    const cdouble sum = wk * std::conj(a_ue[m]) + wu * std::conj(a_uav[m]);
    out.ideal_phases[static_cast<std::size_t>(m)] =
        wrap_phase(std::arg(sum) + distance[static_cast<std::size_t>(m)]);
  }
  return out;
}

/// Nearest L-bit codeword 2πl/2^L on the circle; exact ties keep the lower codeword.
inline std::vector<double> quantize_phases(const std::vector<double>& ideal, int bits) {
  require(bits >= 1, "quantize_phases: bits must be >= 1");
  require(bits <= 30, "quantize_phases: bits must be <= 30");
  const long levels = 1L << bits;
  const double step = kTwoPi / static_cast<double>(levels);
  std::vector<double> out(ideal.size());
  for (std::size_t i = 0; i < ideal.size(); ++i) {
    const double x = wrap_phase(ideal[i]);
    const long below = static_cast<long>(std::floor(x / step)) % levels;
    const long above = (below + 1) % levels;
    const double d_below = circular_distance(x, step * static_cast<double>(below));
    const double d_above = circular_distance(x, step * static_cast<double>(above));
    long pick;
    if (std::abs(d_below - d_above) <= 1e-12) {
      pick = std::min(below, above);
    } else {
      pick = d_below < d_above ? below : above;
    }
    out[i] = step * static_cast<double>(pick);
  }
  return out;
}

inline RisPhaseProfile quantize(RisPhaseProfile profile, int bits) {
  profile.quantized_phases = quantize_phases(profile.ideal_phases, bits);
  profile.bits = bits;
  return profile;
}

/// Expected power efficiency of uniform L-bit phase quantization, sinc²(π/2^L).
inline double quantization_efficiency(int bits) {
  require(bits >= 1, "bits must be >= 1");
  const double x = kPi / static_cast<double>(1L << bits);
  const double s = std::sin(x) / x;
  return s * s;
}

inline void write_phase_profile_csv(std::ostream& os, const RisPhaseProfile& profile) {
  os.precision(17);
  os << "cell_index,ideal_rad,quantized_rad\n";
  for (std::size_t i = 0; i < profile.ideal_phases.size(); ++i) {
    os << i << ',' << profile.ideal_phases[i] << ',';
    if (i < profile.quantized_phases.size()) os << profile.quantized_phases[i];
    os << '\n';
  }
}

}  // namespace risplan
