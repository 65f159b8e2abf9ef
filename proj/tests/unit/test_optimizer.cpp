// Orientation search, constraint constants, power allocation, sizing, Nelder-Mead.

#include "risplan/optimizer.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace risplan;

namespace {

const double kLambda = 299792458.0 / 28e9;

OrientationBounds wide_bounds() {
  OrientationBounds b;
  b.theta_lo = deg_to_rad(-30);
  b.theta_hi = deg_to_rad(60);
  b.psi_lo = -kPi;
  b.psi_hi = kPi;
  return b;
}

Vec3 direction(double elevation_down, double azimuth) {
  return Vec3(std::cos(azimuth) * std::cos(elevation_down), std::sin(azimuth) * std::cos(elevation_down),
              -std::sin(elevation_down));
}

}  // namespace

TEST(OrientationSearch, BoresightFollowsCoalignedTargets) {
  for (double az : {0.0, 0.7, kPi / 2, -2.0}) {
    OrientationTargets t;
    t.to_bs = direction(0.1, az);
    t.to_ue = {direction(0.1, az)};
    const Orientation o = orientation_search(t, wide_bounds());
    EXPECT_NEAR(o.psi_r, az, 1e-5);
    EXPECT_NEAR(o.theta_r, 0.1, 1e-5);
  }
}

TEST(OrientationSearch, SymmetricTargetsGiveBisector) {
  OrientationTargets t;
  t.to_bs = direction(0.0, 0.4);
  t.to_ue = {direction(0.0, -0.4)};
  const Orientation o = orientation_search(t, wide_bounds());
  EXPECT_NEAR(o.psi_r, 0.0, 1e-5);
  EXPECT_NEAR(o.theta_r, 0.0, 1e-5);
}

TEST(OrientationSearch, BsBehindEveryOrientationIsUnreachable) {
  OrientationTargets t;
  t.to_bs = Vec3(0, 0, 1);
  t.to_ue = {Vec3(1, 0, 0)};
  OrientationBounds b;
  b.theta_lo = deg_to_rad(10);
  b.theta_hi = deg_to_rad(60);
  b.psi_lo = -0.5;
  b.psi_hi = 0.5;
  try {
    orientation_search(t, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unreachable_targets);
  }
}

TEST(OrientationSearch, MatchesFineGridOracle) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> el(-0.2, 0.7), az(-0.6, 0.6);
  OrientationBounds b;
  b.theta_lo = deg_to_rad(-30);
  b.theta_hi = deg_to_rad(60);
  b.psi_lo = deg_to_rad(-60);
  b.psi_hi = deg_to_rad(60);
  for (int trial = 0; trial < 10; ++trial) {
    OrientationTargets t;
    t.to_bs = direction(el(rng), az(rng));
    for (int k = 0; k < 3; ++k) t.to_ue.push_back(direction(el(rng), az(rng)));
    t.to_uav = {direction(el(rng), az(rng))};
    const Orientation o = orientation_search(t, b);
    ASSERT_TRUE(b.contains(o));
    // Exhaustive 0.2° grid over the score (all targets lie within 60° of one another).
    double oracle = 0.0;
    const double h = deg_to_rad(0.2);
    for (double th = b.theta_lo; th <= b.theta_hi + 1e-12; th += h) {
      for (double ps = b.psi_lo; ps <= b.psi_hi + 1e-12; ps += h) oracle = std::max(oracle, orientation_score({th, ps}, t));
    }
    EXPECT_GE(orientation_score(o, t), oracle * (1 - 1e-6)) << trial;
  }
}

TEST(OrientationRank, PrefersCoverageOverScore) {
  OrientationTargets t;
  t.max_angle = deg_to_rad(75);
  t.to_bs = direction(0, 0);
  t.to_ue = {direction(0, deg_to_rad(80)), direction(0, deg_to_rad(-10))};
  const auto toward_bs = orientation_rank({0, 0}, t);
  const auto between = orientation_rank({0, deg_to_rad(30)}, t);
  EXPECT_EQ(toward_bs.inside, 2);
  EXPECT_EQ(between.inside, 3);
  EXPECT_TRUE(between > toward_bs);
}

TEST(ConstraintConstants, Examples) {
  QosThresholds q;
  CrbPair ref;
  ref.range_crb = 4e-4;
  ref.velocity_crb = 1e-2;
  const auto c = constraint_constants(1000.0, ref, q, 0.5);
  EXPECT_DOUBLE_EQ(c.c1, 0.2);
  EXPECT_DOUBLE_EQ(c.c2, 2.0);
  EXPECT_DOUBLE_EQ(c.c3, 2.0);
  EXPECT_DOUBLE_EQ(c.c_max, 2.0);
  const auto comm = constraint_constants(10.0, ref, q, 0.9);
  EXPECT_NEAR(comm.c1, 100.0 / 9.0, 1e-12);
  EXPECT_NEAR(comm.c_max, comm.c1, 1e-12);
  EXPECT_DOUBLE_EQ(comm_only_constants(50.0, q).c_max, 2.0);
}

TEST(ConstraintConstants, BetaMustBeInterior) {
  for (double b : {0.0, 1.0, -0.1}) {
    try {
      constraint_constants(1.0, CrbPair{}, QosThresholds{}, b);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::invalid_input);
    }
  }
}

TEST(Kkt, Examples) {
  auto w = kkt_power_allocation({1, 1, 1}, {2, 2, 2}, 0.0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(w[i], 1.0 / 3, 1e-15);
  w = kkt_power_allocation({8, 1}, {1, 1}, 0.0);
  EXPECT_NEAR(w[0], 2.0 / 3, 1e-15);
  EXPECT_NEAR(w[1], 1.0 / 3, 1e-15);
  w = kkt_power_allocation({1, 1}, {1, 8}, 0.2);
  EXPECT_NEAR(w.sum(), 0.8, 1e-15);
  EXPECT_NEAR(w[0] / w[1], 4.0, 1e-12);
  w = kkt_power_allocation({5}, {3}, 0.25);
  EXPECT_NEAR(w[0], 0.75, 1e-15);
}

TEST(Kkt, FullSensingShareIsInfeasible) {
  try {
    kkt_power_allocation({1}, {1}, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::infeasible_power);
  }
}

TEST(Kkt, StationarityAndRandomDraws) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> uc(0.01, 50), ua(10, 500), uw(0, 0.6);
  std::gamma_distribution<double> g(1.0, 1.0);
  const double unit = 0.25 * kLambda * kLambda;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + t % 5;
    std::vector<double> c(n), a(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = uc(rng), a[i] = ua(rng);
    const double w0 = uw(rng);
    const Eigen::VectorXd w = kkt_power_allocation(c, a, w0);
    ASSERT_NEAR(w.sum(), 1 - w0, 1e-12);
    // Equal marginal cost across RISs.
    std::vector<double> grad(n);
    for (std::size_t i = 0; i < n; ++i) grad[i] = std::sqrt(c[i]) / (a[i] * std::pow(w[static_cast<Eigen::Index>(i)], 1.5));
    for (std::size_t i = 1; i < n; ++i) ASSERT_NEAR(grad[i] / grad[0], 1.0, 1e-9);
    const double best = p1_objective(c, a, w, unit, 400);
    for (int d = 0; d < 200; ++d) {
      Eigen::VectorXd r(static_cast<Eigen::Index>(n));
      for (auto& x : r) x = g(rng);
      r *= (1 - w0) / r.sum();
      ASSERT_GE(p1_objective(c, a, r, unit, 400), best * (1 - 1e-12));
    }
  }
}

TEST(RisSize, Examples) {
  const double unit = 0.25 * kLambda * kLambda;
  const auto s = ris_size(1.0, 1.0, unit, 400);
  EXPECT_NEAR(s.area, 0.01146, 0.00001);
  EXPECT_EQ(s.cells_per_side, 20);
  EXPECT_EQ(s.cells, 400);
  EXPECT_NEAR(ris_size(4.0, 1.0, unit, 400).area / s.area, 2.0, 1e-12);
  EXPECT_NEAR(ris_size(1.0, 0.25, unit, 400).area / s.area, 2.0, 1e-12);
  EXPECT_NEAR(ris_size(1.0, 1.0, unit, 400).side, std::sqrt(s.area), 1e-15);
  try {
    ris_size(1.0, 0.0, unit, 400);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::infeasible_power);
  }
}

TEST(P1Objective, IncreasingInEveryConstant) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 10);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> c = {u(rng), u(rng), u(rng)}, a = {u(rng), u(rng), u(rng)};
    const double e0 = p1_objective(c, a, kkt_power_allocation(c, a, 0.1), 1.0, 1);
    c[static_cast<std::size_t>(t % 3)] *= 1.1;
    ASSERT_GT(p1_objective(c, a, kkt_power_allocation(c, a, 0.1), 1.0, 1), e0);
  }
}

namespace {

Vertex vertex3(double x, double y, double z) {
  Block b(3);
  b << x, y, z;
  return {b};
}

Vertex vertex2(double x, double y) {
  Block b(2);
  b << x, y;
  return {b};
}

auto identity = [](const Vertex& v) { return v; };

}  // namespace

TEST(NelderMead, ReflectionExample) {
  const Vertex r = nm_combine(vertex3(0, 0, 0), vertex3(1, 1, 1), 1.0);
  EXPECT_LT((r[0] - Eigen::Vector3d(-1, -1, -1)).norm(), 1e-15);
  const Vertex c = nm_combine(vertex3(0, 0, 0), vertex3(1, 1, 1), -0.5);
  EXPECT_LT((c[0] - Eigen::Vector3d(0.5, 0.5, 0.5)).norm(), 1e-15);
}

TEST(NelderMead, FlatObjectiveShrinksToConvergence) {
  SimplexState s;
  s.points = {vertex2(0, 0), vertex2(5, 0), vertex2(0, 5)};
  NelderMeadOptions opt;
  opt.d_min = 0.3;
  const auto out = nelder_mead(s, [](const Vertex&) { return 1.0; }, identity, opt);
  EXPECT_TRUE(out.converged);
  EXPECT_LE(max_spread(simplex_spread(out.state.points)), 0.3);
  EXPECT_DOUBLE_EQ(out.best_value, 1.0);
}

TEST(NelderMead, QuadraticBowl) {
  SimplexState s;
  s.points = {vertex2(4, 4), vertex2(6, 4), vertex2(4, 7)};
  NelderMeadOptions opt;
  opt.d_min = 1e-6;
  auto f = [](const Vertex& v) { return std::pow(v[0][0] - 1, 2) + 3 * std::pow(v[0][1] + 2, 2); };
  const auto out = nelder_mead(s, f, identity, opt);
  EXPECT_TRUE(out.converged);
  EXPECT_NEAR(out.best[0][0], 1.0, 1e-4);
  EXPECT_NEAR(out.best[0][1], -2.0, 1e-4);
  for (std::size_t i = 1; i < out.trace.size(); ++i) ASSERT_LE(out.trace[i].best, out.trace[i - 1].best);
}

TEST(NelderMead, ProjectionKeepsIterateFeasible) {
  SimplexState s;
  s.points = {vertex2(0.5, 0.5), vertex2(0.9, 0.5), vertex2(0.5, 0.9)};
  NelderMeadOptions opt;
  opt.d_min = 1e-5;
  auto clamp = [](Vertex v) {
    v[0] = v[0].cwiseMax(0.0).cwiseMin(1.0);
    return v;
  };
  // Unconstrained minimum at (3, -1); the box optimum is the corner (1, 0).
  auto f = [](const Vertex& v) { return std::pow(v[0][0] - 3, 2) + std::pow(v[0][1] + 1, 2); };
  const auto out = nelder_mead(s, f, clamp, opt);
  EXPECT_NEAR(out.best[0][0], 1.0, 1e-3);
  EXPECT_NEAR(out.best[0][1], 0.0, 1e-3);
}

TEST(NelderMead, MultiBlockTraceIsMonotone) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int t = 0; t < 20; ++t) {
    SimplexState s;
    for (int v = 0; v < 5; ++v) {
      Block a(2), b(2);
      a << u(rng), u(rng);
      b << u(rng), u(rng);
      s.points.push_back({a, b});
    }
    NelderMeadOptions opt;
    opt.d_min = 1e-3;
    opt.max_iterations = 300;
    auto f = [](const Vertex& v) { return v[0].squaredNorm() + (v[1] - Eigen::Vector2d(1, 1)).squaredNorm() + std::sin(3 * v[0][0]); };
    const auto out = nelder_mead(s, f, identity, opt);
    for (std::size_t i = 1; i < out.trace.size(); ++i) ASSERT_LE(out.trace[i].best, out.trace[i - 1].best);
    ASSERT_EQ(out.trace.back().spread.size(), 2u);
  }
}

TEST(Mode, RoundTrip) {
  for (Mode m : {Mode::full_isac, Mode::comm_only, Mode::pathloss_baseline, Mode::passive_orientation}) {
    EXPECT_EQ(parse_mode(to_string(m)), m);
  }
  EXPECT_THROW(parse_mode("bogus"), Error);
  EXPECT_FALSE(senses(Mode::comm_only));
  EXPECT_TRUE(senses(Mode::passive_orientation));
}
