#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nhimpact/constrained_dynamics.hpp"
#include "nhimpact/error.hpp"
#include "nhimpact/mechanical_models.hpp"
#include "test_support.hpp"

using namespace nhimpact;
using nhimpact::oracle::max_abs_diff;

namespace
{

BallParams unit_ball()
{
  return BallParams{1.0, 0.4, 1.0, 9.81};
}

GenericSystemSpec free_spec(Eigen::Index n)
{
  GenericSystemSpec spec;
  spec.dimension = n;
  spec.metric = Eigen::MatrixXd::Identity(n, n);
  spec.potential_linear = Eigen::VectorXd::Zero(n);
  spec.potential_stiffness = Eigen::MatrixXd::Zero(n, n);
  spec.constraint_A = Eigen::MatrixXd(0, n);
  return spec;
}

// Knife edge in the plane: config (x, y, theta), no sideways slip.
MechanicalSystem knife_edge(double mass, double inertia)
{
  MechanicalSystem sys;
  sys.kind = SystemKind::Generic;
  sys.config_dim = 3;
  sys.velocity_dim = 3;
  const Metric g(Eigen::Vector3d(mass, mass, inertia).asDiagonal().toDenseMatrix());
  sys.metric_at = [g](const Vector&) { return g; };
  sys.potential_at = [](const Vector&) { return 0.0; };
  sys.potential_gradient = [](const Vector&) { return Vector(Vector::Zero(3)); };
  sys.constraint_A_at = [](const Vector& x) {
    return ConstraintMatrix((Eigen::MatrixXd(1, 3) << -std::sin(x(2)), std::cos(x(2)), 0.0).finished());
  };
  sys.config_rate = [](const Vector&, const Vector& v) { return v; };
  sys.constant_constraint = false;
  sys.config_labels = {"x", "y", "theta"};
  sys.velocity_labels = {"vx", "vy", "omega"};
  return sys;
}

FlowState run(const MechanicalSystem& sys, FlowState s, double dt, int steps)
{
  const IntegratorSettings cfg{dt, 1e-10, 1e-6};
  for (int k = 0; k < steps; ++k)
  {
    s = step(sys, s, dt, cfg);
  }
  return s;
}

}  // namespace

TEST(Acceleration, FreeFlightIsGravity)
{
  const MechanicalSystem sys = build_ball_floor_scene(unit_ball());
  BallState b;
  b.position_S = Eigen::Vector3d(0, 0, 3);
  b.v_S = Eigen::Vector3d(1, -2, 0.5);
  b.omega = Eigen::Vector3d(3, 1, -1);
  const Acceleration acc = accel_and_multipliers(sys, ball_config(b), ball_velocity(sys, b));
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(6);
  expected(2) = -9.81;
  EXPECT_LE(max_abs_diff(acc.a, expected), 1e-15);
  EXPECT_EQ(acc.lambda.size(), 0);
}

TEST(Acceleration, RollingWithoutForceIsUniform)
{
  const BallParams p = unit_ball();
  const MechanicalSystem sys = build_ball_wall_scene(p);
  BallState b;
  b.position_S = Eigen::Vector3d(2, 0, 1);
  const Eigen::VectorXd v = rolling_velocity_completion(p, {0.5, -1.0, 3.0});
  const Acceleration acc = accel_and_multipliers(sys, ball_config(b), v);
  EXPECT_LE(acc.a.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE(acc.lambda.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Acceleration, ConstantForceOnRollingBall)
{
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k)
  {
    const BallParams p = oracle::random_ball_params(rng);
    const double force = oracle::uniform(rng, -5.0, 5.0);
    PlanarPotential pot;
    pot.linear = Eigen::Vector2d(-force, 0.0);
    const MechanicalSystem sys = build_ball_wall_scene(p, pot);
    BallState b;
    b.position_S = Eigen::Vector3d(5, 0, p.radius_r);
    const Acceleration acc = accel_and_multipliers(sys, ball_config(b), Eigen::VectorXd::Zero(5));
    const double expected = force / (p.mass + p.inertia_J / (p.radius_r * p.radius_r));
    EXPECT_NEAR(acc.a(0), expected, 1e-13 * (1.0 + std::abs(expected)));
    EXPECT_NEAR(acc.a(3), expected / p.radius_r, 1e-12 * (1.0 + std::abs(expected / p.radius_r)));
    EXPECT_LE((ball_wall_rolling_constraint(p) * acc.a).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Acceleration, PotentialNormalToConstraintIsAbsorbed)
{
  std::mt19937_64 rng(4);
  GenericSystemSpec spec = free_spec(3);
  spec.metric = oracle::random_spd(rng, 3);
  spec.constraint_A = (Eigen::MatrixXd(1, 3) << 1, 1, 0).finished();
  spec.potential_linear = 2.5 * spec.constraint_A.row(0).transpose();
  const MechanicalSystem sys = generic_system_from_config(spec);
  const Acceleration acc = accel_and_multipliers(sys, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3));
  EXPECT_LE(acc.a.cwiseAbs().maxCoeff(), 1e-13);
  ASSERT_EQ(acc.lambda.size(), 1);
  EXPECT_NEAR(acc.lambda(0), 2.5, 1e-13);
}

TEST(Acceleration, PositionDependentMetric)
{
  // L = (v1^2 + x1 v2^2) / 2 gives a1 = v2^2 / 2 and a2 = -v1 v2 / x1.
  GenericSystemSpec spec = free_spec(2);
  spec.metric = Eigen::Matrix2d::Identity();
  spec.metric(1, 1) = 0.0;
  spec.metric_slopes = {(Eigen::MatrixXd(2, 2) << 0, 0, 0, 1).finished(), Eigen::MatrixXd::Zero(2, 2)};
  spec.wall_point = Eigen::Vector2d(1.0, 0.0);
  const MechanicalSystem sys = generic_system_from_config(spec);
  EXPECT_FALSE(sys.constant_metric);

  const double cases[][4] = {{2.0, 0.0, 1.0, 0.5}, {0.7, 3.0, -0.4, 1.2}, {5.0, -1.0, 2.0, -2.0}};
  for (const auto& c : cases)
  {
    const Eigen::Vector2d x(c[0], c[1]);
    const Eigen::Vector2d v(c[2], c[3]);
    const Acceleration acc = accel_and_multipliers(sys, x, v);
    EXPECT_NEAR(acc.a(0), 0.5 * v(1) * v(1), 1e-8);
    EXPECT_NEAR(acc.a(1), -v(0) * v(1) / x(0), 1e-8);
  }
}

TEST(Acceleration, SingularConstraintSystemIsReported)
{
  MechanicalSystem sys = knife_edge(1.0, 1.0);
  // Nearly parallel rows that pass a loose rank check.
  sys.constraint_A_at = [](const Vector&) {
    return ConstraintMatrix((Eigen::MatrixXd(2, 3) << 1, 0, 0, 1, 1e-9, 0).finished(), 1e-12);
  };
  EXPECT_THROW(
      {
        try
        {
          accel_and_multipliers(sys, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero());
        }
        catch (const Error& e)
        {
          EXPECT_EQ(e.kind(), ErrorKind::SingularKKT);
          throw;
        }
      },
      Error);
}

TEST(ProjectVelocity, ExamplesAndOracle)
{
  const Metric identity = Metric::identity(2);
  const ConstraintMatrix a((Eigen::MatrixXd(1, 2) << 1, -1).finished());
  EXPECT_LE(max_abs_diff(project_velocity(identity, a, Eigen::Vector2d(1, 0)), Eigen::Vector2d(0.5, 0.5)), 1e-16);
  EXPECT_EQ(project_velocity(identity, ConstraintMatrix::empty(2), Eigen::Vector2d(3, 4)), Eigen::Vector2d(3, 4));

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial)
  {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(trial % 7);
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(trial % (n - 1 > 0 ? n - 1 : 1));
    const Eigen::MatrixXd gm = oracle::random_spd(rng, n);
    const Eigen::MatrixXd am = oracle::random_matrix(rng, k, n);
    const Eigen::VectorXd v = oracle::random_vector(rng, n);
    const Metric g(gm);
    const ConstraintMatrix ac(am);
    const Eigen::VectorXd u = project_velocity(g, ac, v);
    EXPECT_LE((am * u).cwiseAbs().maxCoeff(), 1e-11);
    EXPECT_LE(max_abs_diff(u, oracle::qp_closest_admissible(gm, am, v)), 1e-9);
    EXPECT_LE(max_abs_diff(project_velocity(g, ac, u), u), 1e-11);
  }
}

TEST(Step, FreeFallIsExactForQuadratics)
{
  const MechanicalSystem sys = build_ball_floor_scene(unit_ball());
  BallState b;
  b.position_S = Eigen::Vector3d(0.5, 0, 10);
  b.v_S = Eigen::Vector3d(1, 2, 3);
  const FlowState s0{0.0, ball_config(b), ball_velocity(sys, b)};
  const double dt = 0.01;
  const FlowState s1 = run(sys, s0, dt, 100);
  const double t = 1.0;
  EXPECT_NEAR(s1.t, t, 1e-13);
  EXPECT_NEAR(s1.x(0), 0.5 + t, 1e-12);
  EXPECT_NEAR(s1.x(1), 2 * t, 1e-12);
  EXPECT_NEAR(s1.x(2), 10 + 3 * t - 0.5 * 9.81 * t * t, 1e-12);
  EXPECT_NEAR(s1.v(2), 3 - 9.81 * t, 1e-12);
}

TEST(Step, OrientationTurnsAboutTheSpatialAxis)
{
  BallParams p = unit_ball();
  p.gravity_g = 0.0;
  const MechanicalSystem sys = build_ball_floor_scene(p);
  BallState b;
  b.position_S = Eigen::Vector3d(0, 0, 4);
  b.orientation = Eigen::Quaterniond(Eigen::AngleAxisd(0.8, Eigen::Vector3d(1, 2, -1).normalized()));
  b.omega = Eigen::Vector3d(0.3, -1.1, 0.7);
  const FlowState s0{0.0, ball_config(b), ball_velocity(sys, b)};
  const FlowState s1 = run(sys, s0, 1e-3, 1500);

  const Eigen::Quaterniond turned =
      Eigen::Quaterniond(Eigen::AngleAxisd(b.omega.norm() * 1.5, b.omega.normalized())) * b.orientation;
  const BallState end = ball_state_from(sys, s1.x, s1.v);
  EXPECT_NEAR(std::abs(end.orientation.dot(turned)), 1.0, 1e-12);
  EXPECT_NEAR(end.orientation.norm(), 1.0, 1e-14);
}

TEST(Step, KnifeEdgeFollowsCircle)
{
  const MechanicalSystem sys = knife_edge(2.0, 0.5);
  const double speed = 1.3;
  const double turn = 0.9;
  const double theta0 = 0.4;
  const FlowState s0{0.0, Eigen::Vector3d(1, -1, theta0),
                     Eigen::Vector3d(speed * std::cos(theta0), speed * std::sin(theta0), turn)};
  const double t = 2.0;
  const FlowState s1 = run(sys, s0, 1e-3, 2000);
  const double theta = theta0 + turn * t;
  EXPECT_NEAR(s1.x(0), 1 + (speed / turn) * (std::sin(theta) - std::sin(theta0)), 1e-8);
  EXPECT_NEAR(s1.x(1), -1 - (speed / turn) * (std::cos(theta) - std::cos(theta0)), 1e-8);
  EXPECT_NEAR(s1.x(2), theta, 1e-10);
  EXPECT_LE(constraint_drift(sys, s1), 1e-12);
  EXPECT_NEAR(energy(sys, s1), energy(sys, s0), 1e-9);
}

TEST(Step, RollingEnergyDriftInBowl)
{
  const BallParams p = unit_ball();
  PlanarPotential bowl;
  bowl.stiffness = Eigen::Matrix2d::Identity();
  bowl.center = Eigen::Vector2d(5, 0);
  const MechanicalSystem sys = build_ball_wall_scene(p, bowl);
  BallState b;
  b.position_S = Eigen::Vector3d(6, 0.5, 1);
  const FlowState s0{0.0, ball_config(b), rolling_velocity_completion(p, {0.0, 0.4, 1.0})};
  const double e0 = energy(sys, s0);
  FlowState s = s0;
  const IntegratorSettings cfg{1e-3, 1e-10, 1e-6};
  double worst_drift = 0.0;
  for (int k = 0; k < 10000; ++k)
  {
    s = step(sys, s, cfg.dt, cfg);
    worst_drift = std::max(worst_drift, constraint_drift(sys, s));
  }
  EXPECT_LE(std::abs(energy(sys, s) - e0) / e0, 1e-10);
  EXPECT_LE(worst_drift, 1e-12);
  EXPECT_NEAR(s.x.tail<4>().norm(), 1.0, 1e-14);
}
