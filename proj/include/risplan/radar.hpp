#pragma once

#include "risplan/fft.hpp"
#include "risplan/sensing.hpp"

#include <algorithm>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace risplan {

/// Per-subcarrier, per-symbol echo: Σ α·e^{−j2πf_pτ}·e^{j2πf_D·m·T}·X[p,m] plus CN(0, noise_power).
inline CMat synthesize_returns(const OfdmParams& ofdm, const CMat& transmitted,
                               const std::vector<SensingPath>& paths, double noise_power,
                               std::uint64_t seed) {
  ofdm.validated();
  require(transmitted.rows() == ofdm.subcarriers && transmitted.cols() == ofdm.symbols,
          "synthesize_returns: frame shape does not match the OFDM parameters");
  require(noise_power >= 0.0, "synthesize_returns: noise power must be >= 0");
  const double t_sym = ofdm.symbol_duration();
  CMat channel = CMat::Zero(ofdm.subcarriers, ofdm.symbols);
  for (const auto& path : paths) {
    if (path.delay < 0.0 || path.delay >= t_sym) {
      fail(ErrorCode::unsupported_delay,
           "path " + std::to_string(path.index) + " delay is outside [0, T_OFDM)");
    }
    CVec over_p(ofdm.subcarriers);
    for (int p = 0; p < ofdm.subcarriers; ++p) {
      over_p[p] = path.coeff * std::polar(1.0, -kTwoPi * ofdm.subcarrier_frequency(p) * path.delay);
    }
    CRowVec over_m(ofdm.symbols);
    for (int m = 0; m < ofdm.symbols; ++m) {
      over_m[m] = std::polar(1.0, kTwoPi * path.doppler * m * t_sym);
    }
    channel.noalias() += over_p * over_m;
  }
  CMat received = channel.cwiseProduct(transmitted);
  if (noise_power > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(noise_power / 2.0));
    for (Eigen::Index m = 0; m < received.cols(); ++m) {
      for (Eigen::Index p = 0; p < received.rows(); ++p) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        received(p, m) += cdouble(re, im);
      }
    }
  }
  return received;
}

/// Rows are range bins from zero; columns are velocity bins with zero Doppler at symbols/2.
struct RangeVelocityMap {
  Eigen::MatrixXd power_db;
  std::vector<double> range_axis;
  std::vector<double> velocity_axis;
  double range_resolution = 0.0;
  double velocity_resolution = 0.0;

  int zero_velocity_column() const { return static_cast<int>(velocity_axis.size()) / 2; }
};

/// Element-wise division, FFT over symbols, IFFT over subcarriers, |.|² in dB.
/// Unnormalized transforms: the linear map sums to N_c·M times Σ|Y/X|².
inline RangeVelocityMap range_velocity_map(const CMat& received, const CMat& transmitted,
                                           const OfdmParams& ofdm) {
  ofdm.validated();
  require(received.rows() == transmitted.rows() && received.cols() == transmitted.cols(),
          "range_velocity_map: matrices differ in shape");
  require(received.rows() == ofdm.subcarriers && received.cols() == ofdm.symbols,
          "range_velocity_map: shape does not match the OFDM parameters");
  if ((transmitted.array().abs() == 0.0).any()) {
    fail(ErrorCode::invalid_input, "range_velocity_map: transmitted frame has a zero symbol");
  }
  CMat d = received.cwiseQuotient(transmitted);
  fft::transform_rows(d, fft::Direction::forward);
  fft::transform_columns(d, fft::Direction::backward);

  const int n = ofdm.subcarriers;
  const int m = ofdm.symbols;
  RangeVelocityMap map;
  map.range_resolution = ofdm.range_resolution();
  map.velocity_resolution = ofdm.velocity_resolution();
  map.power_db.resize(n, m);
  for (int col = 0; col < m; ++col) {
    const int src = (col + m / 2) % m;
    for (int row = 0; row < n; ++row) {
      // The centered subcarrier grid alternates the sign of odd delay bins; |.|² ignores it.
      map.power_db(row, col) = 10.0 * std::log10(std::norm(d(row, src)) + 1e-300);
    }
  }
  map.range_axis.resize(static_cast<std::size_t>(n));
  for (int row = 0; row < n; ++row) map.range_axis[static_cast<std::size_t>(row)] = row * map.range_resolution;
  map.velocity_axis.resize(static_cast<std::size_t>(m));
  for (int col = 0; col < m; ++col) {
    map.velocity_axis[static_cast<std::size_t>(col)] = (col - m / 2) * map.velocity_resolution;
  }
  return map;
}

struct CfarConfig {
  int guard = 2;
  int training = 8;
  double false_alarm_rate = 1e-6;
};

struct PathDetection {
  double range_est = 0.0;
  double velocity_est = 0.0;
  double power_db = 0.0;
  int path_index_hypothesis = -1;
  int range_bin = 0;
  int velocity_bin = 0;
};

struct DetectionReport {
  std::vector<PathDetection> detections;
  bool partial = false;
  std::string warning;
};

/// Two-dimensional cell-averaging CFAR with cyclic edges. Only local maxima are reported.
inline DetectionReport detect_paths(const RangeVelocityMap& map, int expected,
                                    const CfarConfig& cfg = {}) {
  require(expected >= 1, "detect_paths: expected must be >= 1");
  require(cfg.guard >= 0 && cfg.training >= 1, "detect_paths: invalid CFAR window");
  const Eigen::Index rows = map.power_db.rows();
  const Eigen::Index cols = map.power_db.cols();
  const Eigen::MatrixXd lin = map.power_db.unaryExpr([](double x) { return std::pow(10.0, x / 10.0); });

  // Summed-area table over the cyclically padded map.
  const int pad = cfg.guard + cfg.training;
  const Eigen::Index pr = rows + 2 * pad;
  const Eigen::Index pc = cols + 2 * pad;
  Eigen::MatrixXd sat = Eigen::MatrixXd::Zero(pr + 1, pc + 1);
  auto wrap = [](Eigen::Index i, Eigen::Index n) { return ((i % n) + n) % n; };
  for (Eigen::Index c = 0; c < pc; ++c) {
    for (Eigen::Index r = 0; r < pr; ++r) {
      const double v = lin(wrap(r - pad, rows), wrap(c - pad, cols));
      sat(r + 1, c + 1) = v + sat(r, c + 1) + sat(r + 1, c) - sat(r, c);
    }
  }
  auto box = [&](Eigen::Index r, Eigen::Index c, int half) {
    const Eigen::Index r0 = r + pad - half, r1 = r + pad + half + 1;
    const Eigen::Index c0 = c + pad - half, c1 = c + pad + half + 1;
    return sat(r1, c1) - sat(r0, c1) - sat(r1, c0) + sat(r0, c0);
  };
  const int outer = 2 * pad + 1;
  const int inner = 2 * cfg.guard + 1;
  const double n_train = static_cast<double>(outer * outer - inner * inner);
  const double scale = n_train * (std::pow(cfg.false_alarm_rate, -1.0 / n_train) - 1.0);

  DetectionReport report;
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double v = lin(r, c);
      const double noise = (box(r, c, pad) - box(r, c, cfg.guard)) / n_train;
      if (v <= scale * noise) continue;
      bool peak = true;
      for (int dr = -1; dr <= 1 && peak; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const double w = lin(wrap(r + dr, rows), wrap(c + dc, cols));
          if (w > v || (w == v && (dr < 0 || (dr == 0 && dc < 0)))) {
            peak = false;
            break;
          }
        }
      }
      if (!peak) continue;
      PathDetection d;
      d.range_bin = static_cast<int>(r);
      d.velocity_bin = static_cast<int>(c);
      d.range_est = map.range_axis[static_cast<std::size_t>(r)];
      d.velocity_est = map.velocity_axis[static_cast<std::size_t>(c)];
      d.power_db = map.power_db(r, c);
      report.detections.push_back(d);
    }
  }
  std::stable_sort(report.detections.begin(), report.detections.end(),
                   [](const PathDetection& a, const PathDetection& b) { return a.power_db > b.power_db; });
  if (static_cast<int>(report.detections.size()) > expected) report.detections.resize(static_cast<std::size_t>(expected));
  if (static_cast<int>(report.detections.size()) < expected) {
    report.partial = true;
    report.warning = "found " + std::to_string(report.detections.size()) + " of " +
                     std::to_string(expected) + " expected detections";
  }
  return report;
}

/// Greedy nearest-range matching of detections to predicted path ranges within `gate` meters.
/// Returns, per predicted path, the index of its detection or -1.
inline std::vector<int> associate_detections(std::vector<PathDetection>& detections,
                                             const std::vector<double>& predicted_ranges,
                                             double gate) {
  std::vector<int> match(predicted_ranges.size(), -1);
  std::vector<bool> used(detections.size(), false);
  struct Pair {
    double dist;
    std::size_t path, det;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < predicted_ranges.size(); ++i) {
    for (std::size_t j = 0; j < detections.size(); ++j) {
      const double dist = std::abs(detections[j].range_est - predicted_ranges[i]);
      if (dist <= gate) pairs.push_back({dist, i, j});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.dist < b.dist; });
  for (const auto& p : pairs) {
    if (match[p.path] >= 0 || used[p.det]) continue;
    match[p.path] = static_cast<int>(p.det);
    used[p.det] = true;
    detections[p.det].path_index_hypothesis = static_cast<int>(p.path);
  }
  return match;
}

struct PositionEstimate {
  Vec3 position = Vec3::Zero();
  double residual = 0.0;
  int iterations = 0;
};

/// Gauss-Newton fit of (x, y) at a known height. `ranges[0]` is the direct range |p − bs|;
/// `ranges[n]` is half the round trip bs → ris[n-1] → p → bs. Entries that are NaN are skipped.
inline PositionEstimate ls_position(const Vec3& bs, const std::vector<Vec3>& ris_positions,
                                    const std::vector<double>& ranges, double height,
                                    int max_iterations = 50, double gradient_tol = 1e-9) {
  require(ranges.size() == ris_positions.size() + 1, "ls_position: one range per path expected");
  struct Constraint {
    std::optional<Vec3> ris;
    double target;
  };
  std::vector<Constraint> cons;
  if (!std::isnan(ranges[0])) cons.push_back({std::nullopt, ranges[0]});
  for (std::size_t n = 0; n < ris_positions.size(); ++n) {
    if (std::isnan(ranges[n + 1])) continue;
    cons.push_back({ris_positions[n], 2.0 * ranges[n + 1] - (ris_positions[n] - bs).norm()});
  }
  if (cons.size() < 2) fail(ErrorCode::estimation_failure, "ls_position: fewer than two ranges");

  auto residuals = [&](const Vec2& xy, Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
    const Vec3 p(xy.x(), xy.y(), height);
    r.resize(static_cast<Eigen::Index>(cons.size()));
    jac.resize(r.size(), 2);
    for (std::size_t i = 0; i < cons.size(); ++i) {
      const Vec3 db = p - bs;
      const double nb = std::max(db.norm(), 1e-12);
      double value = nb;
      Vec2 grad = db.head<2>() / nb;
      if (cons[i].ris) {
        const Vec3 dr = p - *cons[i].ris;
        const double nr = std::max(dr.norm(), 1e-12);
        value += nr;
        grad += dr.head<2>() / nr;
      }
      r[static_cast<Eigen::Index>(i)] = value - cons[i].target;
      jac.row(static_cast<Eigen::Index>(i)) = grad.transpose();
    }
  };

  // Start from the best point on the direct-range circle (or around the BS if no direct range).
  const double dz = height - bs.z();
  const double radius = cons.front().ris ? 1.0 : std::sqrt(std::max(0.0, cons.front().target * cons.front().target - dz * dz));
  Vec2 x = bs.head<2>();
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  for (int i = 0; i < 72; ++i) {
    const double a = kTwoPi * i / 72.0;
    const Vec2 cand = bs.head<2>() + radius * Vec2(std::cos(a), std::sin(a));
    residuals(cand, r, jac);
    if (r.squaredNorm() < best) {
      best = r.squaredNorm();
      x = cand;
    }
  }

  PositionEstimate out;
  bool converged = false;
  for (int it = 0; it < max_iterations; ++it) {
    residuals(x, r, jac);
    const Eigen::Matrix2d normal = jac.transpose() * jac;
    const Eigen::Vector2d grad = jac.transpose() * r;
    out.iterations = it;
    if (grad.norm() <= gradient_tol) {
      converged = true;
      break;
    }
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(normal);
    const double smax = svd.singularValues()[0];
    const double smin = svd.singularValues()[1];
    if (!(smin > 1e-12 * smax)) break;
    const Vec2 step = normal.ldlt().solve(-grad);
    // Backtrack so the cost never increases.
    double t = 1.0;
    const double cost = r.squaredNorm();
    Eigen::VectorXd r_new;
    Eigen::MatrixXd j_new;
    for (int k = 0; k < 30; ++k) {
      residuals(x + t * step, r_new, j_new);
      if (r_new.squaredNorm() <= cost) break;
      t *= 0.5;
    }
    x += t * step;
    if ((t * step).norm() < 1e-14) {
      residuals(x, r, jac);
      converged = (jac.transpose() * r).norm() <= 1e-6;
      break;
    }
  }
  residuals(x, r, jac);
  out.position = Vec3(x.x(), x.y(), height);
  out.residual = r.norm();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
  const double cond = svd.singularValues()[0] / std::max(svd.singularValues()[1], 1e-300);
  if (!converged || cond > 1e6) {
    fail(ErrorCode::estimation_failure,
         "ls_position: no well-conditioned solution (residual " + std::to_string(out.residual) +
             " m, condition " + std::to_string(cond) + ")");
  }
  return out;
}

}  // namespace risplan
