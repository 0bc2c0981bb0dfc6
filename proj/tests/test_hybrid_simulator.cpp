#include <gtest/gtest.h>

#include <cmath>

#include "nhimpact/hybrid_simulator.hpp"
#include "nhimpact/mechanical_models.hpp"
#include "test_support.hpp"

using namespace nhimpact;
using nhimpact::oracle::max_abs_diff;

namespace
{

constexpr double kG = 9.81;

BallParams unit_ball()
{
  return BallParams{1.0, 0.4, 1.0, kG};
}

FlowState drop_state(const MechanicalSystem& sys, double z, double vz = 0.0)
{
  BallState b;
  b.position_S = Eigen::Vector3d(0, 0, z);
  b.v_S = Eigen::Vector3d(0, 0, vz);
  return {0.0, ball_config(b), ball_velocity(sys, b)};
}

FlowState pendulum_launch(const MechanicalSystem& sys)
{
  BallState b;
  b.position_S = Eigen::Vector3d(0, 0, 2);
  b.v_S = Eigen::Vector3d(-1, 0, -1);
  b.omega = Eigen::Vector3d(0, 2.5, 0);
  return {0.0, ball_config(b), ball_velocity(sys, b)};
}

IntegratorSettings integ(double dt)
{
  return IntegratorSettings{dt, 1e-10, 1e-6};
}

}  // namespace

TEST(DetectCrossing, DropBracketsTheContactTime)
{
  const MechanicalSystem sys = build_ball_floor_scene(unit_ball());
  const FlowState s0 = drop_state(sys, 2.0);
  EXPECT_FALSE(detect_crossing(sys, s0, 0.4, integ(0.4)).has_value());

  const auto bracket = detect_crossing(sys, s0, 0.5, integ(0.5));
  ASSERT_TRUE(bracket.has_value());
  EXPECT_EQ(bracket->dt_lo, 0.0);
  EXPECT_EQ(bracket->dt_hi, 0.5);

  const RefinedCrossing hit = refine_crossing(sys, *bracket, 1e-12, integ(0.5));
  EXPECT_NEAR(hit.tau, std::sqrt(2.0 / kG), 1e-11);
  EXPECT_LE(std::abs(hit.state.x(2) - 1.0), 1e-12);
  EXPECT_LT(hit.state.v(2), 0.0);
  EXPECT_LE(hit.iterations, 60u);
}

TEST(DetectCrossing, NoWallNoBracket)
{
  MechanicalSystem sys = build_ball_floor_scene(unit_ball());
  sys.wall.reset();
  EXPECT_FALSE(detect_crossing(sys, drop_state(sys, 2.0), 1.0, integ(1.0)).has_value());
}

TEST(RefineCrossing, EmptyBracketReturnsItsStart)
{
  const MechanicalSystem sys = build_ball_floor_scene(unit_ball());
  const CrossingBracket bracket{drop_state(sys, 2.0), 0.0, 0.0};
  const RefinedCrossing hit = refine_crossing(sys, bracket, 1e-12, integ(0.1));
  EXPECT_EQ(hit.tau, 0.0);
  EXPECT_EQ(hit.iterations, 0u);
}

TEST(RefineCrossing, StallsWhenOutOfIterations)
{
  const MechanicalSystem sys = build_ball_floor_scene(unit_ball());
  const CrossingBracket bracket{drop_state(sys, 2.0), 0.0, 0.5};
  try
  {
    refine_crossing(sys, bracket, 1e-12, integ(0.5), 3);
    FAIL() << "expected BisectionStall";
  }
  catch (const Error& e)
  {
    EXPECT_EQ(e.kind(), ErrorKind::BisectionStall);
  }
}

TEST(Simulate, NonholonomicPendulumReturnsToLaunch)
{
  const MechanicalSystem sys = build_ball_floor_scene(unit_ball());
  const FlowState s0 = pendulum_launch(sys);
  const double u1 = std::sqrt(1.0 + 2.0 * kG);
  const double t1 = (u1 - 1.0) / kG;
  const double period = 2.0 * (2.0 * u1 / kG);

  SimulationSettings settings;
  const Trajectory traj = simulate(sys, s0, period, integ(1e-4), settings);
  ASSERT_EQ(traj.status, TrajectoryStatus::Completed) << traj.message;
  ASSERT_EQ(traj.events.size(), 2u);
  EXPECT_NEAR(traj.events[0].tau, t1, 1e-10);
  EXPECT_NEAR(traj.events[1].tau, t1 + 2.0 * u1 / kG, 1e-9);
  for (const auto& ev : traj.events)
  {
    EXPECT_LE(max_abs_diff(ev.v_plus, -ev.v_minus), 1e-9);
    EXPECT_NEAR(ev.T_plus, ev.T_minus, 1e-12 * ev.T_minus);
  }
  const FlowState& end = traj.samples.back();
  EXPECT_EQ(end.t, period);
  EXPECT_LE(max_abs_diff(end.x.head<3>(), s0.x.head<3>()), 1e-6);
  EXPECT_LE(max_abs_diff(end.v, s0.v), 1e-6);
  EXPECT_NEAR(std::abs(end.x.tail<4>().dot(s0.x.tail<4>())), 1.0, 1e-9);
}

TEST(Simulate, BallHitsVerticalWallOnce)
{
  const BallParams p = unit_ball();
  const MechanicalSystem sys = build_ball_wall_scene(p);
  BallState b;
  b.position_S = Eigen::Vector3d(3, 0, 1);
  const FlowState s0{0.0, ball_config(b), rolling_velocity_completion(p, {-1, 1, 2})};
  const Trajectory traj = simulate(sys, s0, 4.0, integ(1e-3), SimulationSettings{});
  ASSERT_EQ(traj.status, TrajectoryStatus::Completed) << traj.message;
  ASSERT_EQ(traj.events.size(), 1u);
  EXPECT_NEAR(traj.events[0].tau, 2.0, 1e-10);
  Eigen::VectorXd expected(5);
  expected << 1, 13.0 / 9.0, -13.0 / 9.0, 1, 4.0 / 9.0;
  EXPECT_LE(max_abs_diff(traj.events[0].v_plus, expected), 1e-12);
  EXPECT_NEAR(traj.events[0].T_plus, 2.2, 1e-12);
}

TEST(Simulate, PlasticDropComesToRest)
{
  const MechanicalSystem sys = build_ball_floor_scene(unit_ball());
  SimulationSettings settings;
  settings.mu = 0.0;
  const Trajectory traj = simulate(sys, drop_state(sys, 2.0), 2.0, integ(1e-3), settings);
  EXPECT_EQ(traj.status, TrajectoryStatus::ZenoCap);
  ASSERT_EQ(traj.events.size(), 1u);
  EXPECT_EQ(traj.events[0].v_plus(2), 0.0);
  EXPECT_LE(traj.events[0].T_plus, traj.events[0].T_minus);
}

TEST(Simulate, PartialRestitutionAccumulates)
{
  const MechanicalSystem sys = build_ball_floor_scene(unit_ball());
  SimulationSettings settings;
  settings.mu = 0.5;
  const Trajectory traj = simulate(sys, drop_state(sys, 2.0), 2.0, integ(1e-4), settings);
  EXPECT_EQ(traj.status, TrajectoryStatus::ZenoCap) << traj.message;
  ASSERT_GT(traj.events.size(), 10u);

  // Bounce k lands at t1 + (2 v1 / g) (mu + ... + mu^(k-1)).
  const double v1 = std::sqrt(2.0 * kG);
  const double t1 = v1 / kG;
  double expected = t1;
  double hop = 2.0 * v1 / kG;
  for (std::size_t k = 0; k < 8; ++k)
  {
    EXPECT_NEAR(traj.events[k].tau, expected, 1e-9) << "event " << k;
    hop *= 0.5;
    expected += hop;
  }
  // Locating contacts to |h| <= 1e-12 resolves landing speeds only down to
  // about sqrt(2 g 1e-12) ~ 4e-6, so the last hops are noise of that size.
  const double zeno_time = t1 + 2.0 * v1 / kG;
  EXPECT_NEAR(traj.events.back().tau, zeno_time, 1e-5);
  for (std::size_t k = 1; k < traj.events.size(); ++k)
  {
    EXPECT_GT(traj.events[k].tau, traj.events[k - 1].tau);
    EXPECT_LE(traj.events[k].T_plus, traj.events[k].T_minus);
  }
}

TEST(Simulate, GrazingContactAborts)
{
  BallParams p = unit_ball();
  p.gravity_g = 0.0;
  const MechanicalSystem sys = build_ball_floor_scene(p);
  const Trajectory traj = simulate(sys, drop_state(sys, 1.0 + 1e-10, -1e-9), 1.0, integ(1e-2), SimulationSettings{});
  EXPECT_EQ(traj.status, TrajectoryStatus::GrazingAbort);
  ASSERT_TRUE(traj.failure.has_value());
  EXPECT_EQ(*traj.failure, ErrorKind::GrazingImpact);
  EXPECT_TRUE(traj.events.empty());
}

TEST(Simulate, PostImpactPenetrationIsAnError)
{
  // With B = [1 1] the elastic map sends (-1, 5) to (-5, 1).
  GenericSystemSpec spec;
  spec.dimension = 2;
  spec.metric = Eigen::Matrix2d::Identity();
  spec.potential_linear = Eigen::Vector2d::Zero();
  spec.potential_stiffness = Eigen::Matrix2d::Zero();
  spec.constraint_A = Eigen::MatrixXd(0, 2);
  spec.constraint_B = (Eigen::MatrixXd(1, 2) << 1, 1).finished();
  spec.guard_normal = Eigen::Vector2d(1, 0);
  const MechanicalSystem sys = generic_system_from_config(spec);
  const FlowState s0{0.0, Eigen::Vector2d(0.5, 0), Eigen::Vector2d(-1, 5)};
  const Trajectory traj = simulate(sys, s0, 1.0, integ(1e-2), SimulationSettings{});
  EXPECT_EQ(traj.status, TrajectoryStatus::Error);
  ASSERT_TRUE(traj.failure.has_value());
  EXPECT_EQ(*traj.failure, ErrorKind::WallPenetration);
  ASSERT_EQ(traj.events.size(), 1u);
  EXPECT_LE(max_abs_diff(traj.events[0].v_plus, Eigen::Vector2d(-5, 1)), 1e-14);
}

TEST(Simulate, InitialStateChecks)
{
  const MechanicalSystem sys = build_ball_floor_scene(unit_ball());
  const Trajectory behind = simulate(sys, drop_state(sys, 0.5), 1.0, integ(1e-3), SimulationSettings{});
  EXPECT_EQ(behind.status, TrajectoryStatus::Error);
  EXPECT_EQ(behind.failure, ErrorKind::WallPenetration);

  const Trajectory lifting = simulate(sys, drop_state(sys, 1.0, 2.0), 0.1, integ(1e-3), SimulationSettings{});
  EXPECT_EQ(lifting.status, TrajectoryStatus::Completed);

  const BallParams p = unit_ball();
  const MechanicalSystem wall = build_ball_wall_scene(p);
  BallState b;
  b.position_S = Eigen::Vector3d(3, 0, 1);
  Eigen::VectorXd slipping(5);
  slipping << 1, 0, 0, 0, 0;
  const Trajectory bad = simulate(wall, {0.0, ball_config(b), slipping}, 1.0, integ(1e-3), SimulationSettings{});
  EXPECT_EQ(bad.status, TrajectoryStatus::Error);
  EXPECT_EQ(bad.failure, ErrorKind::InadmissiblePreVelocity);
}

TEST(Simulate, EventCapStopsTheRun)
{
  const MechanicalSystem sys = build_ball_floor_scene(unit_ball());
  SimulationSettings settings;
  settings.max_events = 1;
  const Trajectory traj = simulate(sys, pendulum_launch(sys), 3.0, integ(1e-3), settings);
  EXPECT_EQ(traj.status, TrajectoryStatus::ZenoCap);
  EXPECT_EQ(traj.events.size(), 1u);
}

TEST(Simulate, ZeroHorizonKeepsOnlyTheInitialSample)
{
  const MechanicalSystem sys = build_ball_floor_scene(unit_ball());
  const FlowState s0 = pendulum_launch(sys);
  const Trajectory traj = simulate(sys, s0, 0.0, integ(1e-3), SimulationSettings{});
  EXPECT_EQ(traj.status, TrajectoryStatus::Completed);
  ASSERT_EQ(traj.samples.size(), 1u);
  EXPECT_EQ(traj.samples[0].x, s0.x);
}

TEST(Simulate, SamplesAreOrderedContinuousAndOutsideTheWall)
{
  const MechanicalSystem sys = build_ball_floor_scene(unit_ball());
  SimulationSettings settings;
  settings.mu = 0.8;
  const double dt = 1e-3;
  const Trajectory traj = simulate(sys, pendulum_launch(sys), 3.0, integ(dt), settings);
  ASSERT_FALSE(traj.samples.empty());
  for (std::size_t k = 0; k < traj.samples.size(); ++k)
  {
    EXPECT_GE(sys.wall->guard(traj.samples[k].x), -settings.event_tol);
    if (k > 0)
    {
      const double gap = traj.samples[k].t - traj.samples[k - 1].t;
      EXPECT_GT(gap, 0.0);
      EXPECT_LE(gap, dt * (1.0 + 1e-12));
      EXPECT_LE((traj.samples[k].x - traj.samples[k - 1].x).norm(), 1e3 * dt);
    }
  }
}

TEST(Simulate, Deterministic)
{
  const MechanicalSystem sys = build_ball_floor_scene(unit_ball());
  SimulationSettings settings;
  settings.mu = 0.7;
  const Trajectory a = simulate(sys, pendulum_launch(sys), 2.0, integ(1e-3), settings);
  const Trajectory b = simulate(sys, pendulum_launch(sys), 2.0, integ(1e-3), settings);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t k = 0; k < a.samples.size(); ++k)
  {
    EXPECT_EQ(a.samples[k].t, b.samples[k].t);
    EXPECT_EQ(a.samples[k].x, b.samples[k].x);
    EXPECT_EQ(a.samples[k].v, b.samples[k].v);
  }
}

TEST(Audit, PendulumRun)
{
  const MechanicalSystem sys = build_ball_floor_scene(unit_ball());
  const Trajectory traj = simulate(sys, pendulum_launch(sys), 1.0, integ(1e-4), SimulationSettings{});
  const AuditReport report = audit(sys, traj);
  EXPECT_EQ(report.event_count, traj.events.size());
  EXPECT_EQ(report.sample_count, traj.samples.size());
  EXPECT_LE(report.max_elastic_energy_error, 1e-12);
  EXPECT_LE(report.max_jump_orthogonality, 1e-12);
  EXPECT_EQ(report.max_constraint_drift, 0.0);
  EXPECT_LE(report.max_arc_energy_drift, 1e-12);
}

TEST(Audit, InelasticRunNeverGainsEnergy)
{
  const BallParams p = unit_ball();
  PlanarPotential pull;
  pull.linear = Eigen::Vector2d(2.0, 0.0);
  const MechanicalSystem sys = build_ball_wall_scene(p, pull);
  BallState b;
  b.position_S = Eigen::Vector3d(3, 0, 1);
  SimulationSettings settings;
  settings.mu = 0.6;
  const Trajectory traj =
      simulate(sys, {0.0, ball_config(b), rolling_velocity_completion(p, {-1, 0.5, 1})}, 6.0, integ(1e-3), settings);
  const AuditReport report = audit(sys, traj);
  ASSERT_GE(report.event_count, 2u);
  EXPECT_LE(report.max_energy_gain, 0.0);
  EXPECT_LE(report.max_jump_orthogonality, 1e-12);
  EXPECT_LE(report.max_constraint_drift, 1e-12);
}

TEST(Audit, EmptyTrajectory)
{
  const MechanicalSystem sys = build_ball_floor_scene(unit_ball());
  const AuditReport report = audit(sys, Trajectory{});
  EXPECT_EQ(report.event_count, 0u);
  EXPECT_EQ(report.sample_count, 0u);
  EXPECT_EQ(report.max_arc_energy_drift, 0.0);
}
