#pragma once

#include "risplan/core.hpp"
#include "risplan/fft.hpp"

#include <random>

namespace risplan {

struct OfdmParams {
  double carrier = 28e9;
  double bandwidth = 1e9;
  int subcarriers = 2560;
  int symbols = 2048;

  double wavelength() const { return wavelength_of(carrier); }
  double subcarrier_spacing() const { return bandwidth / subcarriers; }
  double symbol_duration() const { return subcarriers / bandwidth; }
  double frame_duration() const { return symbols * symbol_duration(); }
  double range_resolution() const { return kSpeedOfLight / (2.0 * bandwidth); }
  double velocity_resolution() const { return wavelength() / (2.0 * frame_duration()); }
  /// Baseband frequency of subcarrier p, centered on the carrier.
  double subcarrier_frequency(int p) const {
    return (p - subcarriers / 2) * subcarrier_spacing();
  }

  const OfdmParams& validated() const {
    require(carrier > 0.0 && bandwidth > 0.0, "OFDM carrier and bandwidth must be > 0");
    require(subcarriers >= 1 && symbols >= 1, "OFDM dimensions must be >= 1");
    return *this;
  }
};

/// Echo of one target path. Range and velocity are c0·τ/2 and λ·f_D/2.
struct SensingPath {
  int index = 0;
  double delay = 0.0;
  double doppler = 0.0;
  double range = 0.0;
  double velocity = 0.0;
  cdouble coeff{0.0, 0.0};

  static SensingPath from_range_velocity(int index, double range, double velocity,
                                         double wavelength, cdouble coeff) {
    return {index, 2.0 * range / kSpeedOfLight, 2.0 * velocity / wavelength, range, velocity,
            coeff};
  }
};

/// Half the round-trip length and the radial velocity (positive when the path shortens).
struct RoundTrip {
  double range = 0.0;
  double velocity = 0.0;
};

inline RoundTrip direct_round_trip(const Vec3& bs, const Vec3& target, const Vec3& target_velocity) {
  const Vec3 d = target - bs;
  const double r = d.norm();
  return {r, -target_velocity.dot(d / r)};
}

/// BS → RIS → target → BS. The RIS leg is static; the other two legs move with the target.
inline RoundTrip ris_round_trip(const Vec3& bs, const Vec3& ris, const Vec3& target,
                                const Vec3& target_velocity) {
  const Vec3 to_ris = target - ris;
  const Vec3 to_bs = target - bs;
  const double total = (ris - bs).norm() + to_ris.norm() + to_bs.norm();
  const double rate = target_velocity.dot(to_ris.normalized() + to_bs.normalized());
  return {0.5 * total, -0.5 * rate};
}

struct CrbPair {
  double range_crb = 0.0;
  double velocity_crb = 0.0;
  Eigen::Matrix2d fim = Eigen::Matrix2d::Zero();
};

/// The three frame integrals the FIM needs, plus the frame energy.
struct WaveformMoments {
  double derivative_energy = 0.0;
  cdouble time_cross{0.0, 0.0};
  double time_energy = 0.0;
  double energy = 0.0;
};

/// Unit-modulus QPSK symbols, subcarriers × symbols.
inline CMat qpsk_frame(const OfdmParams& ofdm, std::uint64_t seed) {
  ofdm.validated();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, 3);
  const double h = 1.0 / std::sqrt(2.0);
  const cdouble points[4] = {{h, h}, {-h, h}, {-h, -h}, {h, -h}};
  CMat x(ofdm.subcarriers, ofdm.symbols);
  for (Eigen::Index m = 0; m < x.cols(); ++m) {
    for (Eigen::Index p = 0; p < x.rows(); ++p) x(p, m) = points[pick(rng)];
  }
  return x;
}

/// Riemann sums at 1/B spacing over the frame for s(t − delay) with average power `power`.
/// The delay is applied cyclically per symbol.
inline WaveformMoments waveform_moments(const OfdmParams& ofdm, const CMat& frame, double power,
                                        double delay = 0.0) {
  ofdm.validated();
  require(frame.rows() == ofdm.subcarriers && frame.cols() == ofdm.symbols,
          "waveform_moments: frame shape does not match the OFDM parameters");
  const int n = ofdm.subcarriers;
  const double scale = std::sqrt(power / n);
  CMat s(n, ofdm.symbols);
  CMat ds(n, ofdm.symbols);
  for (int p = 0; p < n; ++p) {
    const double f = ofdm.subcarrier_frequency(p);
    const cdouble shift = std::polar(scale, -kTwoPi * f * delay);
    s.row(p) = frame.row(p) * shift;
    ds.row(p) = frame.row(p) * (shift * cdouble(0.0, kTwoPi * f));
  }
  fft::transform_columns(s, fft::Direction::backward);
  fft::transform_columns(ds, fft::Direction::backward);

  const double dt = 1.0 / ofdm.bandwidth;
  WaveformMoments out;
  for (int m = 0; m < ofdm.symbols; ++m) {
    for (int i = 0; i < n; ++i) {
      // Centering the subcarrier grid multiplies sample i by (-1)^i.
      const double sign = (i % 2 == 0) ? 1.0 : -1.0;
      const cdouble si = sign * s(i, m);
      const cdouble dsi = sign * ds(i, m);
      const double t = (static_cast<double>(m) * n + i) * dt;
      out.derivative_energy += std::norm(dsi);
      out.time_cross += t * dsi * std::conj(si);
      out.time_energy += t * t * std::norm(si);
      out.energy += std::norm(si);
    }
  }
  out.derivative_energy *= dt;
  out.time_cross *= dt;
  out.time_energy *= dt;
  out.energy *= dt;
  return out;
}

/// 2×2 Fisher information for (range, velocity) and its inverse diagonal.
inline CrbPair fim(const OfdmParams& ofdm, const SensingPath& path, double noise,
                   const WaveformMoments& moments) {
  require(noise > 0.0, "fim: noise must be > 0");
  const double a2 = std::norm(path.coeff);
  if (!(a2 > 0.0)) fail(ErrorCode::unobservable_path, "fim: path coefficient is zero");
  const double lambda = ofdm.wavelength();
  const double c = kSpeedOfLight;
  CrbPair out;
  const double jdd = 8.0 * a2 / (noise * c * c) * moments.derivative_energy;
  const double jvd =
      16.0 * kPi * a2 / (noise * lambda * c) * (cdouble(0.0, 1.0) * moments.time_cross).real();
  const double jvv = 32.0 * kPi * kPi * a2 / (noise * lambda * lambda) * moments.time_energy;
  out.fim << jdd, jvd, jvd, jvv;
  const double det = jdd * jvv - jvd * jvd;
  if (!(det > 0.0)) fail(ErrorCode::unobservable_path, "fim: information matrix is singular");
  out.range_crb = jvv / det;
  out.velocity_crb = jdd / det;
  return out;
}

/// CRBs of a panel α times the reference size, with sensing share β_u and BS weight ω.
inline CrbPair reference_crb_scale(const CrbPair& ref, double beta_sense, double omega,
                                   double size_scale) {
  const double denom = beta_sense * omega * size_scale * size_scale;
  require(denom > 0.0 && std::isfinite(denom), "reference_crb_scale: zero denominator");
  CrbPair out = ref;
  out.range_crb /= denom;
  out.velocity_crb /= denom;
  out.fim *= denom;
  return out;
}

enum class SensingPathKind { direct, ris };

/// Effective sensing matrix (M_b × M_b) of one echo path.
struct SensingChannels {
  SensingPathKind kind = SensingPathKind::direct;
  CMat matrix;
};

/// hᵀh for the BS→target→BS echo.
inline SensingChannels direct_sensing_channels(const CRowVec& h_bs_target) {
  return {SensingPathKind::direct, h_bs_target.transpose() * h_bs_target};
}

/// h_{b,u}ᵀ (h_{n,u} Φ H_{b,n}) for the echo that visits the RIS once.
inline SensingChannels ris_sensing_channels(const CRowVec& h_bs_target, const CRowVec& cascade) {
  require(h_bs_target.size() == cascade.size(), "ris_sensing_channels: dimension mismatch");
  return {SensingPathKind::ris, h_bs_target.transpose() * cascade};
}

inline cdouble sensing_coefficient(const SensingChannels& ch, const CVec& w_uav, const CVec& w_ris,
                                   double target_coeff) {
  require(ch.matrix.rows() == w_uav.size() && ch.matrix.cols() == w_uav.size(),
          "sensing_coefficient: dimension mismatch");
  if (ch.kind == SensingPathKind::direct) {
    return target_coeff * (w_uav.transpose() * ch.matrix * w_uav)(0, 0);
  }
  require(w_ris.size() == w_uav.size(), "sensing_coefficient: dimension mismatch");
  const cdouble forward = (w_uav.transpose() * ch.matrix * w_ris)(0, 0);
  const cdouble backward = (w_ris.transpose() * ch.matrix.transpose() * w_uav)(0, 0);
  return target_coeff * (forward + backward);
}

}  // namespace risplan
