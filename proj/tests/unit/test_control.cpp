#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "nonplanar/control.hpp"
#include "test_roads.hpp"
#include "test_support.hpp"

using namespace nonplanar;
using nonplanar::testing::Rng;

namespace {

VehicleState at(double s, double y, double theta, double v) { return {v, {s, y, theta}}; }

Policy policy_of(Controller& c) {
  return [&c](const VehicleState& x, double t) { return c.decide(x, t); };
}

MpcConfig planar_config() {
  MpcConfig c;
  c.model = PredictionModel::Planar;
  return c;
}

double median(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST(WarmShift, Examples) {
  // N = 2: [z0 u0 z1 u1 z2] -> [z1 u1 z2 u1 z2]
  VectorXd prev(16);
  for (int i = 0; i < 16; ++i) prev(i) = i;
  const VectorXd out = warm_shift(prev, 2);
  VectorXd expect(16);
  expect << 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 10, 11, 12, 13, 14, 15;
  EXPECT_EQ(out, expect);

  VectorXd constant = VectorXd::Constant(6 * 20 + 4, 1.5);
  EXPECT_EQ(warm_shift(constant, 20), constant);
  EXPECT_THROW(warm_shift(prev, 3), std::invalid_argument);
}

TEST(MpcConfig, Validation) {
  MpcConfig c;
  EXPECT_NO_THROW(c.validate());
  c.horizon = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.w_y = c.w_theta = c.w_v = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.w_dgamma = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(MpcConfig{}.dimension(), 124);
}

TEST(Mpc, EquilibriumGivesZeroInput) {
  const RoadSurface road = nonplanar::testing::straight_flat_road(200.0);
  MpcController mpc(road, {}, {});
  MpcDiagnostics d;
  const ControlInput u = mpc.step(at(10.0, 0.0, 0.0, 10.0), &d);
  EXPECT_LE(std::hypot(u.a_t, u.gamma), 1e-6);
  EXPECT_EQ(d.status, SolveStatus::Converged);
  ASSERT_EQ(d.predicted.size(), 21u);
  EXPECT_NEAR(d.predicted.back()(1), 10.0 + 20 * 0.05 * 10.0, 1e-6);
}

TEST(Mpc, ClosedLoopEquilibriumHolds) {
  const RoadSurface road = nonplanar::testing::straight_flat_road(200.0);
  MpcController mpc(road, {}, {});
  SimulationOptions o;
  o.duration = 5.0;
  const auto log = simulate(road, {}, at(5.0, 0.0, 0.0, 10.0), policy_of(mpc), o);
  for (const LogRow& r : log) {
    EXPECT_LE(std::abs(r.state.pose.y), 1e-6);
    EXPECT_LE(std::abs(r.state.pose.theta), 1e-6);
    EXPECT_LE(std::abs(r.state.v - 10.0), 1e-6);
  }
}

TEST(Mpc, LateralOffsetDecaysMonotonically) {
  const RoadSurface road = nonplanar::testing::straight_flat_road(200.0);
  MpcController mpc(road, {}, {});
  SimulationOptions o;
  o.duration = 3.0;
  const auto log = simulate(road, {}, at(5.0, 1.0, 0.0, 10.0), policy_of(mpc), o);
  // Monotone until inside the 5 cm band, and it never leaves the band again.
  std::size_t i = 1;
  for (; i < log.size() && std::abs(log[i - 1].state.pose.y) >= 0.05; ++i)
    EXPECT_LE(log[i].state.pose.y, log[i - 1].state.pose.y) << "t = " << log[i].t;
  ASSERT_LT(i, log.size());
  for (; i < log.size(); ++i) EXPECT_LT(std::abs(log[i].state.pose.y), 0.05) << "t = " << log[i].t;
}

TEST(Mpc, SteadyTurnMatchesKinematicOracle) {
  const double kappa = 0.02;
  const RoadSurface road = nonplanar::testing::constant_frenet_road(kappa, 400.0);
  const VehicleParams p;
  MpcController mpc(road, p, planar_config());
  SimulationOptions o;
  o.duration = 20.0;
  const auto log = simulate(road, p, at(5.0, 0.0, 0.0, 10.0), policy_of(mpc), o);
  const LogRow& last = log.back();
  const double beta = slip_angle(last.input.gamma, p);
  // theta + beta = 0 and theta_dot = 0 at steady state.
  EXPECT_NEAR(last.state.pose.theta + beta, 0.0, 1e-5);
  const double y = last.state.pose.y;
  EXPECT_NEAR(std::tan(last.input.gamma) * std::cos(beta), kappa * p.wheelbase() / (1.0 - kappa * y), 1e-6);
  EXPECT_LT(std::abs(y), 0.05);
  EXPECT_GT(last.input.gamma, 0.0);
}

TEST(Mpc, PlanarAndNonplanarAgreeOnFlatRoads) {
  Rng rng(41);
  const CurvatureProfile k = nonplanar::testing::random_curvature(rng, 200.0);
  const RoadSurface road(nonplanar::testing::planar_angles_from(k));
  MpcConfig tight;
  tight.sqp.kkt_tol = 1e-8;
  MpcConfig planar = tight;
  planar.model = PredictionModel::Planar;
  for (int i = 0; i < 10; ++i) {
    const VehicleState x = at(rng.uniform(10, 150), rng.uniform(-1, 1), rng.uniform(-0.2, 0.2),
                              rng.uniform(6, 14));
    MpcController a(road, {}, tight), b(road, {}, planar);
    MpcDiagnostics da, db;
    const ControlInput ua = a.step(x, &da), ub = b.step(x, &db);
    ASSERT_EQ(da.status, SolveStatus::Converged);
    ASSERT_EQ(db.status, SolveStatus::Converged);
    EXPECT_NEAR(ua.a_t, ub.a_t, 1e-6);
    EXPECT_NEAR(ua.gamma, ub.gamma, 1e-6);
  }
}

TEST(Mpc, InputsAlwaysInsideBoxes) {
  Rng rng(42);
  const RoadSurface road = nonplanar::testing::hilly_road();
  const VehicleParams p;
  MpcController mpc(road, p, {});
  MpcConfig pc = planar_config();
  pc.gravity_feed_forward = true;
  MpcController planar(road, p, pc);
  for (int i = 0; i < 20; ++i) {
    const VehicleState x = at(rng.uniform(10, 150), rng.uniform(-3, 3), rng.uniform(-1, 1),
                              rng.uniform(0, 25));
    for (Controller* c : {static_cast<Controller*>(&mpc), static_cast<Controller*>(&planar)}) {
      const ControlInput u = c->decide(x, 0.0).input;
      EXPECT_GE(u.a_t, p.a_min);
      EXPECT_LE(u.a_t, p.a_max);
      EXPECT_GE(u.gamma, p.gamma_min);
      EXPECT_LE(u.gamma, p.gamma_max);
    }
  }
}

TEST(Mpc, FallsBackToPreviousInputOnFailure) {
  const RoadSurface road = nonplanar::testing::straight_flat_road(200.0);
  MpcConfig c;
  c.sqp.max_iterations = 0;
  MpcController mpc(road, {}, c);
  MpcDiagnostics d;
  const ControlInput u = mpc.step(at(10.0, 1.0, 0.1, 8.0), &d);
  EXPECT_TRUE(d.fallback);
  EXPECT_EQ(d.status, SolveStatus::MaxIterations);
  EXPECT_EQ(u.a_t, 0.0);
  EXPECT_EQ(u.gamma, 0.0);
  const ControlDecision dec = mpc.decide(at(10.0, 1.0, 0.1, 8.0), 0.0);
  EXPECT_NE(dec.status.find("fallback"), std::string::npos);
}

TEST(Mpc, WarmStartNeedsFewerIterationsOnLoop) {
  const RoadSurface road = nonplanar::testing::looping_road();
  const auto run = [&](bool warm) {
    MpcController mpc(road, {}, {}, SpeedPlannerConfig{});
    mpc.set_warm_start(warm);
    std::vector<int> its;
    const Policy policy = [&](const VehicleState& x, double) {
      MpcDiagnostics d;
      ControlDecision out;
      out.input = mpc.step(x, &d);
      its.push_back(d.iterations);
      return out;
    };
    SimulationOptions o;
    o.duration = 8.0;
    simulate(road, {}, at(5.0, 0.0, 0.0, 10.0), policy, o);
    return median(its);
  };
  EXPECT_LT(run(true), run(false));
}

// ---------------------------------------------------------------------------

TEST(SpeedPlanner, FlatRoadKeepsDesired) {
  const RoadSurface road = nonplanar::testing::straight_flat_road(200.0);
  const PlannedSpeed ps = plan_speed(road, at(10.0, 0.5, 0.0, 9.0), 10.0, {}, 10.0);
  EXPECT_DOUBLE_EQ(ps.v, 10.0);
  EXPECT_FALSE(ps.infeasible_band);
}

TEST(SpeedPlanner, RatePenaltyBlendsTowardsPrevious) {
  const RoadSurface road = nonplanar::testing::straight_flat_road(200.0);
  SpeedPlannerConfig c;
  c.rate_weight = 3.0;
  EXPECT_DOUBLE_EQ(plan_speed(road, at(10.0, 0.0, 0.0, 9.0), 10.0, c, 6.0).v, 7.0);
}

TEST(SpeedPlanner, LoopRaisesSpeedToCriticalValue) {
  // Inside of the loop the lower band edge binds where cos(phi) is smallest.
  const double r = 20.0, m = 2303.0, g = 9.81;
  const RoadSurface loop = nonplanar::testing::loop_road(r);
  // Start 20 m short of the top so that a sample lands on it.
  const double s = std::numbers::pi * r - 20.0;
  for (double margin : {0.0, 500.0}) {
    SpeedPlannerConfig c;
    c.rate_weight = 0.0;
    c.margin = margin;
    const PlannedSpeed ps = plan_speed(loop, at(s, 0.0, 0.0, 10.0), 10.0, c, 10.0);
    const double oracle = std::sqrt(r * ((c.f_min + margin) / m + g));
    EXPECT_GT(oracle, 10.0);
    EXPECT_NEAR(ps.v, oracle, 1e-9);
    EXPECT_NEAR(ps.lo, oracle, 1e-9);
    EXPECT_FALSE(ps.infeasible_band);
  }
}

TEST(SpeedPlanner, CrestLowersSpeed) {
  // Convex crest: positive normal curvature along the path lightens the car.
  const double r = 15.0;
  const RoadSurface crest(DarbouxProfile({0.0, 60.0}, {0.0, 0.0}, {1.0 / r, 1.0 / r}, {0.0, 0.0}));
  SpeedPlannerConfig c;
  c.lookahead = 5.0;
  c.rate_weight = 0.0;
  c.margin = 0.0;
  const PlannedSpeed ps = plan_speed(crest, at(0.0, 0.0, 0.0, 10.0), 10.0, c, 10.0);
  const double oracle = std::sqrt(r * (9.81 * std::cos(c.lookahead / r) - 8000.0 / 2303.0));
  EXPECT_LT(oracle, 10.0);
  EXPECT_NEAR(ps.v, oracle, 1e-9);
}

TEST(SpeedPlanner, EmptyBandFlagsMinimumViolation) {
  SpeedPlannerConfig c;
  c.f_min = 30000.0;  // flat road weight is below this at any speed
  const RoadSurface road = nonplanar::testing::straight_flat_road(200.0);
  const PlannedSpeed ps = plan_speed(road, at(10.0, 0.0, 0.0, 10.0), 10.0, c, 10.0);
  EXPECT_TRUE(ps.infeasible_band);
  EXPECT_TRUE(std::isfinite(ps.v));

  // On the loop with a narrow band the minimiser balances both edges.
  SpeedPlannerConfig narrow;
  narrow.f_min = 30000.0;
  narrow.f_max = 31000.0;
  narrow.margin = 0.0;
  const RoadSurface loop = nonplanar::testing::loop_road();
  const PlannedSpeed q = plan_speed(loop, at(10.0, 0.0, 0.0, 10.0), 10.0, narrow, 10.0);
  EXPECT_TRUE(q.infeasible_band);
  const double m = 2303.0, g = 9.81, r = 20.0;
  // Samples span phi in [0.5, 2.0]; the extremes set F at v: m (v^2/r + g cos phi).
  const double hi = m * (q.v * q.v / r + g * std::cos(0.5)) - narrow.f_max;
  const double lo = narrow.f_min - m * (q.v * q.v / r + g * std::cos(2.0));
  EXPECT_NEAR(hi, lo, 1.0);
}

TEST(SpeedPlanner, ConfigValidation) {
  SpeedPlannerConfig c;
  EXPECT_NO_THROW(c.validate());
  c.f_min = 20000.0;
  c.f_max = 20800.0;  // margins overlap
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.lookahead = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(SpeedPlanner, NoOscillationOverTheLoop) {
  const RoadSurface road = nonplanar::testing::looping_road();
  MpcController mpc(road, {}, {}, SpeedPlannerConfig{});
  SimulationOptions o;
  o.duration = 14.0;
  const auto log = simulate(road, {}, at(5.0, 0.0, 0.0, 10.0), policy_of(mpc), o);
  int reversals = 0;
  double last_delta = 0.0;
  for (std::size_t i = 2; i < log.size(); ++i) {
    const double delta = log[i].v_ref_adj - log[i - 1].v_ref_adj;
    if (std::abs(delta) < 0.05) continue;
    if (last_delta != 0.0 && (delta > 0) != (last_delta > 0)) ++reversals;
    last_delta = delta;
  }
  EXPECT_LE(reversals, 2);
}

// ---------------------------------------------------------------------------

TEST(Stanley, Examples) {
  const RoadSurface flat = nonplanar::testing::straight_flat_road(200.0);
  StanleyController st(flat, {}, {});
  const ControlInput u = st.step(at(10.0, 0.0, 0.0, 10.0));
  EXPECT_EQ(u.a_t, 0.0);
  EXPECT_EQ(u.gamma, 0.0);
  EXPECT_LT(st.step(at(10.0, 0.5, 0.0, 10.0)).gamma, 0.0);
  EXPECT_GT(st.step(at(10.0, -0.5, 0.0, 10.0)).gamma, 0.0);
  EXPECT_LT(st.step(at(10.0, 0.0, 0.2, 10.0)).gamma, 0.0);

  const double b = 0.15;
  const RoadSurface slope = nonplanar::testing::slope_road(b);
  StanleyController up(slope, {}, {});
  EXPECT_NEAR(up.step(at(10.0, 0.0, 0.0, 10.0)).a_t, 9.81 * std::sin(b), 1e-12);
  // Travelling downhill flips the feed-forward.
  EXPECT_NEAR(up.step(at(10.0, 0.0, std::numbers::pi, 10.0)).a_t, -9.81 * std::sin(b), 1e-12);
}

TEST(Stanley, SaturatesAndSteersBack) {
  const RoadSurface flat = nonplanar::testing::straight_flat_road(200.0);
  const VehicleParams p;
  StanleyController st(flat, p, {});
  const ControlInput u = st.step(at(10.0, 3.0, 0.0, 0.0));
  EXPECT_EQ(u.gamma, p.gamma_min);
  EXPECT_EQ(u.a_t, p.a_max);

  SimulationOptions o;
  o.duration = 6.0;
  const auto log = simulate(flat, p, at(5.0, 1.0, 0.0, 10.0), policy_of(st), o);
  EXPECT_LT(std::abs(log.back().state.pose.y), 0.05);
}

TEST(Stanley, ConfigValidation) {
  StanleyConfig c;
  c.k = 0.0;
  const RoadSurface flat = nonplanar::testing::straight_flat_road();
  EXPECT_THROW(StanleyController(flat, {}, c), std::invalid_argument);
}
