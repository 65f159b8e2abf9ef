// Echo synthesis, range-velocity map, CFAR, LS positioning.

#include "risplan/radar.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace risplan;

namespace {

OfdmParams small_ofdm() {
  OfdmParams o;
  o.subcarriers = 128;
  o.symbols = 64;
  return o;
}

std::pair<int, int> argmax(const Eigen::MatrixXd& m) {
  Eigen::Index r = 0, c = 0;
  m.maxCoeff(&r, &c);
  return {static_cast<int>(r), static_cast<int>(c)};
}

Eigen::MatrixXd flat_map(int rows, int cols, double level_db) { return Eigen::MatrixXd::Constant(rows, cols, level_db); }

RangeVelocityMap wrap_map(Eigen::MatrixXd power) {
  RangeVelocityMap m;
  m.range_resolution = 0.15;
  m.velocity_resolution = 1.0;
  for (Eigen::Index r = 0; r < power.rows(); ++r) m.range_axis.push_back(0.15 * static_cast<double>(r));
  for (Eigen::Index c = 0; c < power.cols(); ++c) m.velocity_axis.push_back(static_cast<double>(c - power.cols() / 2));
  m.power_db = std::move(power);
  return m;
}

}  // namespace

TEST(SynthesizeReturns, ZeroDelayUnitPathReproducesFrame) {
  const auto o = small_ofdm();
  const CMat x = qpsk_frame(o, 1);
  SensingPath p;
  p.coeff = 1.0;
  const CMat y = synthesize_returns(o, x, {p}, 0.0, 0);
  EXPECT_LT((y - x).norm(), 1e-12);
}

TEST(SynthesizeReturns, NoPathsNoNoiseIsZero) {
  const auto o = small_ofdm();
  EXPECT_EQ(synthesize_returns(o, qpsk_frame(o, 1), {}, 0.0, 0).norm(), 0.0);
}

TEST(SynthesizeReturns, DelayBeyondSymbolIsRejected) {
  const auto o = small_ofdm();
  SensingPath p;
  p.coeff = 1.0;
  p.delay = 2 * o.symbol_duration();
  try {
    synthesize_returns(o, qpsk_frame(o, 1), {p}, 0.0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unsupported_delay);
  }
}

TEST(SynthesizeReturns, PathsSuperpose) {
  const auto o = small_ofdm();
  const CMat x = qpsk_frame(o, 2);
  const auto a = SensingPath::from_range_velocity(0, 12.0, 3.0, o.wavelength(), cdouble(0.3, 0.1));
  const auto b = SensingPath::from_range_velocity(1, 15.0, -7.0, o.wavelength(), cdouble(-0.2, 0.5));
  const CMat both = synthesize_returns(o, x, {a, b}, 0.0, 0);
  const CMat sum = synthesize_returns(o, x, {a}, 0.0, 0) + synthesize_returns(o, x, {b}, 0.0, 0);
  EXPECT_LT((both - sum).norm(), 1e-10 * sum.norm());
}

TEST(RangeVelocityMap, TableResolutionsAndPeakBin) {
  const OfdmParams o;
  EXPECT_NEAR(o.range_resolution(), 0.15, 0.15 * 0.01);
  EXPECT_NEAR(o.velocity_resolution(), 1.021, 1.021 * 0.01);
  const CMat x = qpsk_frame(o, 3);
  const auto p = SensingPath::from_range_velocity(0, 30.0, 0.0, o.wavelength(), 1.0);
  const auto map = range_velocity_map(synthesize_returns(o, x, {p}, 0.0, 0), x, o);
  const auto [r, c] = argmax(map.power_db);
  EXPECT_EQ(r, 200);
  EXPECT_EQ(c, map.zero_velocity_column());
  EXPECT_NEAR(map.velocity_axis[static_cast<std::size_t>(c)], 0.0, 1e-12);
}

TEST(RangeVelocityMap, PeakTracksOnGridTargets) {
  const auto o = small_ofdm();
  const CMat x = qpsk_frame(o, 4);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> rb(1, o.subcarriers - 1), vb(-o.symbols / 2, o.symbols / 2 - 1);
  for (int t = 0; t < 30; ++t) {
    const int r0 = rb(rng), v0 = vb(rng);
    const auto p = SensingPath::from_range_velocity(0, r0 * o.range_resolution(), v0 * o.velocity_resolution(),
                                                    o.wavelength(), 1.0);
    const auto map = range_velocity_map(synthesize_returns(o, x, {p}, 0.0, 0), x, o);
    const auto [r, c] = argmax(map.power_db);
    ASSERT_EQ(r, r0);
    ASSERT_EQ(c, v0 + o.symbols / 2);
  }
}

TEST(RangeVelocityMap, Parseval) {
  const auto o = small_ofdm();
  const CMat x = qpsk_frame(o, 6);
  const auto p = SensingPath::from_range_velocity(0, 7.3, 4.4, o.wavelength(), cdouble(0.2, -0.9));
  const CMat y = synthesize_returns(o, x, {p}, 0.01, 9);
  const auto map = range_velocity_map(y, x, o);
  const double lin = (map.power_db.array() * (std::log(10.0) / 10.0)).exp().sum();
  const double direct = y.cwiseQuotient(x).squaredNorm();
  EXPECT_NEAR(lin / (direct * o.subcarriers * o.symbols), 1.0, 1e-9);
}

TEST(RangeVelocityMap, ZeroTransmittedSymbolIsRejected) {
  const auto o = small_ofdm();
  CMat x = qpsk_frame(o, 1);
  x(3, 4) = 0.0;
  EXPECT_THROW(range_velocity_map(x, x, o), Error);
}

TEST(Cfar, SinglePeakAboveFlatFloor) {
  Eigen::MatrixXd m = flat_map(40, 40, -50);
  m(10, 20) = 0;
  const auto rep = detect_paths(wrap_map(m), 1);
  ASSERT_EQ(rep.detections.size(), 1u);
  EXPECT_FALSE(rep.partial);
  EXPECT_EQ(rep.detections[0].range_bin, 10);
  EXPECT_EQ(rep.detections[0].velocity_bin, 20);
  EXPECT_NEAR(rep.detections[0].range_est, 1.5, 1e-12);
  EXPECT_NEAR(rep.detections[0].velocity_est, 0.0, 1e-12);
}

TEST(Cfar, FlatMapHasNoDetections) {
  const auto rep = detect_paths(wrap_map(flat_map(30, 30, -20)), 2);
  EXPECT_TRUE(rep.detections.empty());
  EXPECT_TRUE(rep.partial);
  EXPECT_FALSE(rep.warning.empty());
}

TEST(Cfar, StrongestKeptInPowerOrder) {
  Eigen::MatrixXd m = flat_map(50, 50, -60);
  m(5, 5) = -10;
  m(25, 30) = 0;
  m(40, 12) = -5;
  const auto rep = detect_paths(wrap_map(m), 2);
  ASSERT_EQ(rep.detections.size(), 2u);
  EXPECT_EQ(rep.detections[0].range_bin, 25);
  EXPECT_EQ(rep.detections[1].range_bin, 40);
}

TEST(Cfar, WeakPeakBelowThresholdIsIgnored) {
  Eigen::MatrixXd m = flat_map(40, 40, -50);
  m(10, 10) = -48;
  EXPECT_TRUE(detect_paths(wrap_map(m), 1).detections.empty());
}

TEST(Cfar, DetectsSynthesizedPaths) {
  const auto o = small_ofdm();
  const CMat x = qpsk_frame(o, 8);
  std::vector<SensingPath> paths = {
      SensingPath::from_range_velocity(0, 20 * o.range_resolution(), 5 * o.velocity_resolution(), o.wavelength(), 1.0),
      SensingPath::from_range_velocity(1, 60 * o.range_resolution(), -9 * o.velocity_resolution(), o.wavelength(), 0.5),
      SensingPath::from_range_velocity(2, 95 * o.range_resolution(), 0.0, o.wavelength(), 0.3)};
  const auto map = range_velocity_map(synthesize_returns(o, x, paths, 1e-3, 11), x, o);
  auto rep = detect_paths(map, 3);
  ASSERT_EQ(rep.detections.size(), 3u);
  const auto match = associate_detections(rep.detections, {paths[0].range, paths[1].range, paths[2].range}, 0.5);
  for (std::size_t i = 0; i < 3; ++i) {
    ASSERT_GE(match[i], 0);
    const auto& d = rep.detections[static_cast<std::size_t>(match[i])];
    EXPECT_NEAR(d.range_est, paths[i].range, 1e-9);
    EXPECT_NEAR(d.velocity_est, paths[i].velocity, 1e-9);
    EXPECT_EQ(d.path_index_hypothesis, static_cast<int>(i));
  }
}

TEST(Associate, GateAndUniqueness) {
  std::vector<PathDetection> dets(2);
  dets[0].range_est = 10.0;
  dets[1].range_est = 10.2;
  const auto m = associate_detections(dets, {10.1, 10.25, 50.0}, 0.5);
  EXPECT_EQ(m[1], 1);
  EXPECT_EQ(m[0], 0);
  EXPECT_EQ(m[2], -1);
}

namespace {

const Vec3 kBs(0, 0, 25);
const std::vector<Vec3> kRis = {Vec3(30, -10, 12), Vec3(-30, -12, 12)};

std::vector<double> exact_ranges(const Vec3& p) {
  std::vector<double> r = {(p - kBs).norm()};
  for (const auto& q : kRis) r.push_back(0.5 * ((q - kBs).norm() + (p - q).norm() + (p - kBs).norm()));
  return r;
}

}  // namespace

TEST(LsPosition, ExactRangesRecoverPosition) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> ux(-15, 15), uy(-45, -15);
  for (int t = 0; t < 50; ++t) {
    const Vec3 p(ux(rng), uy(rng), 40);
    const auto est = ls_position(kBs, kRis, exact_ranges(p), 40);
    ASSERT_LT((est.position - p).norm(), 1e-6);
    ASSERT_LT(est.residual, 1e-6);
  }
}

TEST(LsPosition, PerturbedRangesMedianError) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> ux(-15, 15), uy(-45, -15);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<double> err;
  for (int t = 0; t < 200; ++t) {
    const Vec3 p(ux(rng), uy(rng), 40);
    auto r = exact_ranges(p);
    for (auto& x : r) x += noise(rng);
    err.push_back((ls_position(kBs, kRis, r, 40).position - p).norm());
  }
  std::nth_element(err.begin(), err.begin() + 100, err.end());
  EXPECT_LE(err[100], 0.2);
}

TEST(LsPosition, MissingRangesAreSkipped) {
  const Vec3 p(5, -30, 40);
  auto r = exact_ranges(p);
  r[2] = std::nan("");
  EXPECT_LT((ls_position(kBs, kRis, r, 40).position - p).norm(), 1e-3);
}

TEST(LsPosition, SingleRangeIsEstimationFailure) {
  auto r = exact_ranges(Vec3(0, -30, 40));
  r[1] = r[2] = std::nan("");
  try {
    ls_position(kBs, kRis, r, 40);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::estimation_failure);
  }
}
