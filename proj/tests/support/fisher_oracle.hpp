#pragma once

// Finite-difference Fisher information of a discretized echo, built by explicit per-sample
// synthesis. Shares no code with the closed-form moment computation.

#include "risplan/sensing.hpp"

#include <vector>

namespace risplan::testing {

/// α·s(t − τ)·e^{j2π f_D t} sampled at 1/B, with s the per-symbol OFDM waveform of `frame`.
inline std::vector<cdouble> echo_samples(const OfdmParams& o, const CMat& frame, double power, cdouble alpha,
                                         double range, double velocity) {
  const int n = o.subcarriers;
  const double tau = 2 * range / kSpeedOfLight, fd = 2 * velocity / o.wavelength();
  const double dt = 1.0 / o.bandwidth, df = o.subcarrier_spacing();
  std::vector<cdouble> out;
  out.reserve(static_cast<std::size_t>(n * o.symbols));
  for (int m = 0; m < o.symbols; ++m) {
    for (int i = 0; i < n; ++i) {
      cdouble s = 0;
      for (int p = 0; p < n; ++p) {
        const double f = (p - n / 2) * df;
        s += frame(p, m) * std::polar(1.0, kTwoPi * f * (i * dt - tau));
      }
      s *= std::sqrt(power / n);
      const double t = (static_cast<double>(m) * n + i) * dt;
      out.push_back(alpha * s * std::polar(1.0, kTwoPi * fd * t));
    }
  }
  return out;
}

struct NumericCrb {
  double range = 0.0;
  double velocity = 0.0;
};

/// Central differences in (range, velocity); noise is a PSD in W/Hz.
inline NumericCrb finite_difference_crb(const OfdmParams& o, const CMat& frame, double power, cdouble alpha,
                                        double range, double velocity, double noise) {
  const double hd = 1e-4, hv = 1e-2, dt = 1.0 / o.bandwidth;
  const auto dp = echo_samples(o, frame, power, alpha, range + hd, velocity);
  const auto dm = echo_samples(o, frame, power, alpha, range - hd, velocity);
  const auto vp = echo_samples(o, frame, power, alpha, range, velocity + hv);
  const auto vm = echo_samples(o, frame, power, alpha, range, velocity - hv);
  double jdd = 0, jvv = 0, jdv = 0;
  for (std::size_t i = 0; i < dp.size(); ++i) {
    const cdouble gd = (dp[i] - dm[i]) / (2 * hd), gv = (vp[i] - vm[i]) / (2 * hv);
    jdd += std::norm(gd);
    jvv += std::norm(gv);
    jdv += (gd * std::conj(gv)).real();
  }
  const double k = 2.0 / noise * dt;
  jdd *= k;
  jvv *= k;
  jdv *= k;
  const double det = jdd * jvv - jdv * jdv;
  return {jvv / det, jdd / det};
}

}  // namespace risplan::testing
