#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nhimpact/constraint_geometry.hpp"

namespace nhimpact
{

/// Homogeneous ball: mass, moment of inertia J about any axis through the
/// centre S, radius r, and gravitational acceleration along -z.
struct BallParams
{
  double mass = 1.0;
  double inertia_J = 0.4;
  double radius_r = 1.0;
  double gravity_g = 9.81;

  // Throws SchemaError naming the offending field.
  void validate() const;

  // J' = J + r^2 m (inertia about a contact point).
  double j_prime() const { return inertia_J + radius_r * radius_r * mass; }
  // J~ = J + r^2 m / 2.
  double j_tilde() const { return inertia_J + 0.5 * radius_r * radius_r * mass; }

  bool operator==(const BallParams&) const = default;
};

/// Translational and angular velocity of the ball, both in the fixed frame.
struct BallVelocity
{
  Eigen::Vector3d v_S = Eigen::Vector3d::Zero();
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
};

struct BallState
{
  Eigen::Vector3d position_S = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d v_S = Eigen::Vector3d::Zero();
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
};

/// (v1, v2, w3) for a ball rolling on the floor; the remaining angular
/// components follow from rolling: w1 = -v2 / r, w2 = v1 / r.
struct ReducedWallState
{
  double v1 = 0.0;
  double v2 = 0.0;
  double w3 = 0.0;
};

/// V(x_S, y_S) = linear . p + (p - center)^T stiffness (p - center) / 2.
struct PlanarPotential
{
  Eigen::Vector2d linear = Eigen::Vector2d::Zero();
  Eigen::Matrix2d stiffness = Eigen::Matrix2d::Zero();
  Eigen::Vector2d center = Eigen::Vector2d::Zero();

  double value(const Eigen::Vector2d& p) const;
  Eigen::Vector2d gradient(const Eigen::Vector2d& p) const;
};

enum class SystemKind
{
  BallFloor,
  BallWall,
  Generic,
};

using Vector = Eigen::VectorXd;

/// Unilateral constraint: N = {h(x) = 0}, admissible side h > 0, with the
/// extra velocity constraint B(x) that holds on N.
struct WallSpec
{
  std::function<double(const Vector& x)> guard;
  std::function<double(const Vector& x, const Vector& v)> guard_rate;
  std::function<ConstraintMatrix(const Vector& x)> constraint_B_at;
};

/// A natural mechanical system L = T - V written in configuration
/// coordinates x (config_dim) and velocity coordinates v (velocity_dim).
///
/// For the ball scenes x = (x_S, y_S, z_S, q_w, q_x, q_y, q_z) and v are
/// quasi-velocities (v_S, omega) in which the metric is constant. For
/// generic systems x is a chart and v = dx/dt.
///
/// potential_gradient returns the generalized force conjugate to v, i.e.
/// dV/dt = potential_gradient(x) . v.
struct MechanicalSystem
{
  SystemKind kind = SystemKind::Generic;
  Eigen::Index config_dim = 0;
  Eigen::Index velocity_dim = 0;

  std::function<Metric(const Vector& x)> metric_at;
  std::function<double(const Vector& x)> potential_at;
  std::function<Vector(const Vector& x)> potential_gradient;
  std::function<ConstraintMatrix(const Vector& x)> constraint_A_at;
  std::function<Vector(const Vector& x, const Vector& v)> config_rate;
  std::function<void(Vector& x)> normalize_config;  // optional

  // When false, metric (resp. constraint) derivatives are taken by central
  // differences; that path requires chart velocities (config_rate(x, v) = v).
  bool constant_metric = true;
  bool constant_constraint = true;

  std::optional<WallSpec> wall;
  std::optional<BallParams> ball;

  std::vector<std::string> config_labels;
  std::vector<std::string> velocity_labels;
};

/// Ball thrown to the rough floor z = 0: free flight (A empty), guard
/// z_S - r, and on contact the rolling condition v_S + omega x SC = 0.
MechanicalSystem build_ball_floor_scene(const BallParams& p);

/// Ball rolling on the rough floor towards the rough wall x = 0: velocity
/// (v1, v2, w1, w2, w3), guard x_S - r, B adds no-slip at the wall contact.
MechanicalSystem build_ball_wall_scene(const BallParams& p, const PlanarPotential& potential = {});

// Constraint matrices of the two ball scenes.
Eigen::MatrixXd ball_floor_metric(const BallParams& p);
Eigen::MatrixXd ball_floor_wall_constraint(const BallParams& p);
Eigen::MatrixXd ball_wall_metric(const BallParams& p);
Eigen::MatrixXd ball_wall_rolling_constraint(const BallParams& p);
Eigen::MatrixXd ball_wall_wall_constraint(const BallParams& p);

// Velocity after the ball hits the floor with restitution mu (mu = 1 is the
// energy-conserving reflection).
BallVelocity ball_floor_impact_closed_form(const BallParams& p, const BallVelocity& before, double mu);

ReducedWallState ball_wall_impact_closed_form(const BallParams& p, const ReducedWallState& before);

// (v1, v2, -v2 / r, v1 / r, w3)
Eigen::Matrix<double, 5, 1> rolling_velocity_completion(const BallParams& p, const ReducedWallState& s);

// m (CS x v_S) + J omega with CS = (0, 0, r).
Eigen::Vector3d contact_angular_momentum(const BallParams& p, const BallVelocity& s);

// Configuration/velocity packing for the ball scenes.
Vector ball_config(const BallState& s);
Vector ball_velocity(const MechanicalSystem& sys, const BallState& s);
BallState ball_state_from(const MechanicalSystem& sys, const Vector& x, const Vector& v);

/// Description of a generic system with constant constraints.
///
/// G(x) = metric + sum_k x_k metric_slopes[k]   (slopes optional)
/// V(x) = potential_linear . x + x^T potential_stiffness x / 2
/// h(x) = guard_offset + guard_normal . x       (no wall if guard_normal is empty)
struct GenericSystemSpec
{
  Eigen::Index dimension = 0;
  Eigen::MatrixXd metric;
  std::vector<Eigen::MatrixXd> metric_slopes;
  Eigen::VectorXd potential_linear;
  Eigen::MatrixXd potential_stiffness;
  Eigen::MatrixXd constraint_A;
  Eigen::MatrixXd constraint_B;
  double guard_offset = 0.0;
  Eigen::VectorXd guard_normal;
  std::optional<Eigen::VectorXd> wall_point;
};

// Throws SchemaError on inconsistent dimensions or a non-SPD metric,
// RankDeficient (naming the matrix) for rank-deficient A or B, and
// NestingViolated when ker B is not inside ker A at the wall point.
MechanicalSystem generic_system_from_config(const GenericSystemSpec& spec,
                                            double rank_tol = kDefaultRankTol,
                                            double nesting_tol = kDefaultNestingTol);

}  // namespace nhimpact
