#include "nhimpact/mechanical_models.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "nhimpact/error.hpp"

namespace nhimpact
{

namespace
{

constexpr Eigen::Index kBallConfigDim = 7;

void require_positive(double value, const char* field)
{
  if (!(std::isfinite(value) && value > 0.0))
  {
    throw SchemaError(std::string("params.") + field, "must be a positive finite number");
  }
}

Eigen::Quaterniond orientation_of(const Vector& x)
{
  return Eigen::Quaterniond(x(3), x(4), x(5), x(6));
}

// q' = (0, w) * q / 2 for an angular velocity w given in the fixed frame.
Eigen::Vector4d quaternion_rate(const Vector& x, const Eigen::Vector3d& omega)
{
  const double w = x(3);
  const Eigen::Vector3d u(x(4), x(5), x(6));
  Eigen::Vector4d rate;
  rate(0) = -0.5 * omega.dot(u);
  rate.tail<3>() = 0.5 * (w * omega + omega.cross(u));
  return rate;
}

void normalize_quaternion(Vector& x)
{
  x.segment<4>(3).normalize();
}

std::vector<std::string> ball_config_labels()
{
  return {"x_S", "y_S", "z_S", "q_w", "q_x", "q_y", "q_z"};
}

}  // namespace

void BallParams::validate() const
{
  require_positive(mass, "mass");
  require_positive(inertia_J, "inertia_J");
  require_positive(radius_r, "radius_r");
  if (!(std::isfinite(gravity_g) && gravity_g >= 0.0))
  {
    throw SchemaError("params.gravity_g", "must be a finite number >= 0");
  }
}

double PlanarPotential::value(const Eigen::Vector2d& p) const
{
  const Eigen::Vector2d d = p - center;
  return linear.dot(p) + 0.5 * d.dot(stiffness * d);
}

Eigen::Vector2d PlanarPotential::gradient(const Eigen::Vector2d& p) const
{
  const Eigen::Matrix2d sym = 0.5 * (stiffness + stiffness.transpose());
  return linear + sym * (p - center);
}

// ===== Scene matrices =====

Eigen::MatrixXd ball_floor_metric(const BallParams& p)
{
  Eigen::VectorXd diag(6);
  diag << p.mass, p.mass, p.mass, p.inertia_J, p.inertia_J, p.inertia_J;
  return diag.asDiagonal();
}

Eigen::MatrixXd ball_floor_wall_constraint(const BallParams& p)
{
  const double r = p.radius_r;
  Eigen::MatrixXd b(3, 6);
  // clang-format off
  b << 1, 0, 0, 0, -r, 0,
       0, 1, 0, r,  0, 0,
       0, 0, 1, 0,  0, 0;
  // clang-format on
  return b;
}

Eigen::MatrixXd ball_wall_metric(const BallParams& p)
{
  Eigen::VectorXd diag(5);
  diag << p.mass, p.mass, p.inertia_J, p.inertia_J, p.inertia_J;
  return diag.asDiagonal();
}

Eigen::MatrixXd ball_wall_rolling_constraint(const BallParams& p)
{
  const double r = p.radius_r;
  Eigen::MatrixXd a(2, 5);
  // clang-format off
  a << 1, 0, 0, -r, 0,
       0, 1, r,  0, 0;
  // clang-format on
  return a;
}

Eigen::MatrixXd ball_wall_wall_constraint(const BallParams& p)
{
  const double r = p.radius_r;
  Eigen::MatrixXd b(4, 5);
  // clang-format off
  b << 1, 0, 0, 0,  0,
       0, 1, 0, 0, -r,
       0, 0, 0, 1,  0,
       0, 1, r, 0,  0;
  // clang-format on
  return b;
}

// ===== Scenes =====

MechanicalSystem build_ball_floor_scene(const BallParams& p)
{
  p.validate();
  const Metric metric(ball_floor_metric(p));
  const ConstraintMatrix no_constraint = ConstraintMatrix::empty(6);
  const ConstraintMatrix wall_b(ball_floor_wall_constraint(p));
  const double r = p.radius_r;
  const double weight = p.mass * p.gravity_g;

  MechanicalSystem sys;
  sys.kind = SystemKind::BallFloor;
  sys.config_dim = kBallConfigDim;
  sys.velocity_dim = 6;
  sys.metric_at = [metric](const Vector&) { return metric; };
  sys.potential_at = [weight](const Vector& x) { return weight * x(2); };
  sys.potential_gradient = [weight](const Vector&) {
    Vector g = Vector::Zero(6);
    g(2) = weight;
    return g;
  };
  sys.constraint_A_at = [no_constraint](const Vector&) { return no_constraint; };
  sys.config_rate = [](const Vector& x, const Vector& v) {
    Vector rate(kBallConfigDim);
    rate.head<3>() = v.head<3>();
    rate.tail<4>() = quaternion_rate(x, v.tail<3>());
    return rate;
  };
  sys.normalize_config = normalize_quaternion;
  sys.wall = WallSpec{
      [r](const Vector& x) { return x(2) - r; },
      [](const Vector&, const Vector& v) { return v(2); },
      [wall_b](const Vector&) { return wall_b; },
  };
  sys.ball = p;
  sys.config_labels = ball_config_labels();
  sys.velocity_labels = {"v_x", "v_y", "v_z", "w_x", "w_y", "w_z"};
  return sys;
}

MechanicalSystem build_ball_wall_scene(const BallParams& p, const PlanarPotential& potential)
{
  p.validate();
  const Metric metric(ball_wall_metric(p));
  const ConstraintMatrix rolling(ball_wall_rolling_constraint(p));
  const ConstraintMatrix wall_b(ball_wall_wall_constraint(p));
  const double r = p.radius_r;

  MechanicalSystem sys;
  sys.kind = SystemKind::BallWall;
  sys.config_dim = kBallConfigDim;
  sys.velocity_dim = 5;
  sys.metric_at = [metric](const Vector&) { return metric; };
  sys.potential_at = [potential](const Vector& x) { return potential.value(x.head<2>()); };
  sys.potential_gradient = [potential](const Vector& x) {
    Vector g = Vector::Zero(5);
    g.head<2>() = potential.gradient(x.head<2>());
    return g;
  };
  sys.constraint_A_at = [rolling](const Vector&) { return rolling; };
  sys.config_rate = [](const Vector& x, const Vector& v) {
    Vector rate(kBallConfigDim);
    rate << v(0), v(1), 0.0, quaternion_rate(x, v.tail<3>());
    return rate;
  };
  sys.normalize_config = normalize_quaternion;
  sys.wall = WallSpec{
      [r](const Vector& x) { return x(0) - r; },
      [](const Vector&, const Vector& v) { return v(0); },
      [wall_b](const Vector&) { return wall_b; },
  };
  sys.ball = p;
  sys.config_labels = ball_config_labels();
  sys.velocity_labels = {"v_x", "v_y", "w_x", "w_y", "w_z"};
  return sys;
}

// ===== Closed forms =====

BallVelocity ball_floor_impact_closed_form(const BallParams& p, const BallVelocity& before, double mu)
{
  const double m = p.mass;
  const double J = p.inertia_J;
  const double r = p.radius_r;
  const double Jp = p.j_prime();
  const Eigen::Vector3d& v = before.v_S;
  const Eigen::Vector3d& w = before.omega;

  const double vv = (m * r * r - mu * J) / Jp;
  const double vw = J * r * (1.0 + mu) / Jp;
  const double wv = r * m * (1.0 + mu) / Jp;
  const double ww = (J - mu * m * r * r) / Jp;

  BallVelocity after;
  after.v_S(0) = vv * v(0) + vw * w(1);
  after.v_S(1) = vv * v(1) - vw * w(0);
  after.v_S(2) = -mu * v(2);
  after.omega(0) = -wv * v(1) + ww * w(0);
  after.omega(1) = wv * v(0) + ww * w(1);
  after.omega(2) = w(2);
  return after;
}

ReducedWallState ball_wall_impact_closed_form(const BallParams& p, const ReducedWallState& before)
{
  const double m = p.mass;
  const double J = p.inertia_J;
  const double r = p.radius_r;
  const double Jt = p.j_tilde();

  ReducedWallState after;
  after.v1 = -before.v1;
  after.v2 = (r * r * m / (2.0 * Jt)) * before.v2 + (r * J / Jt) * before.w3;
  after.w3 = (p.j_prime() / (r * Jt)) * before.v2 - (r * r * m / (2.0 * Jt)) * before.w3;
  return after;
}

Eigen::Matrix<double, 5, 1> rolling_velocity_completion(const BallParams& p, const ReducedWallState& s)
{
  Eigen::Matrix<double, 5, 1> v;
  v << s.v1, s.v2, -s.v2 / p.radius_r, s.v1 / p.radius_r, s.w3;
  return v;
}

Eigen::Vector3d contact_angular_momentum(const BallParams& p, const BallVelocity& s)
{
  const Eigen::Vector3d cs(0.0, 0.0, p.radius_r);
  return p.mass * cs.cross(s.v_S) + p.inertia_J * s.omega;
}

// ===== Packing =====

Vector ball_config(const BallState& s)
{
  Vector x(kBallConfigDim);
  const auto& q = s.orientation;
  x << s.position_S, q.w(), q.x(), q.y(), q.z();
  return x;
}

Vector ball_velocity(const MechanicalSystem& sys, const BallState& s)
{
  if (sys.kind == SystemKind::BallWall)
  {
    Vector v(5);
    v << s.v_S(0), s.v_S(1), s.omega;
    return v;
  }
  Vector v(6);
  v << s.v_S, s.omega;
  return v;
}

BallState ball_state_from(const MechanicalSystem& sys, const Vector& x, const Vector& v)
{
  BallState s;
  s.position_S = x.head<3>();
  s.orientation = orientation_of(x);
  if (sys.kind == SystemKind::BallWall)
  {
    s.v_S = Eigen::Vector3d(v(0), v(1), 0.0);
    s.omega = v.tail<3>();
  }
  else
  {
    s.v_S = v.head<3>();
    s.omega = v.tail<3>();
  }
  return s;
}

// ===== Generic =====

MechanicalSystem generic_system_from_config(const GenericSystemSpec& spec, double rank_tol,
                                            double nesting_tol)
{
  const Eigen::Index n = spec.dimension;
  if (n <= 0)
  {
    throw SchemaError("params.dimension", "must be a positive integer");
  }
  auto require_shape = [](const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols,
                          const std::string& field) {
    if (m.rows() != rows || m.cols() != cols)
    {
      std::ostringstream os;
      os << "expected " << rows << "x" << cols << ", got " << m.rows() << "x" << m.cols();
      throw SchemaError(field, os.str());
    }
  };
  require_shape(spec.metric, n, n, "params.metric");
  if (!spec.metric_slopes.empty() && static_cast<Eigen::Index>(spec.metric_slopes.size()) != n)
  {
    throw SchemaError("params.metric_slopes", "must hold one matrix per coordinate");
  }
  for (std::size_t k = 0; k < spec.metric_slopes.size(); ++k)
  {
    require_shape(spec.metric_slopes[k], n, n, "params.metric_slopes[" + std::to_string(k) + "]");
  }
  require_shape(spec.potential_linear, n, 1, "params.potential.linear");
  require_shape(spec.potential_stiffness, n, n, "params.potential.stiffness");
  if (spec.constraint_A.rows() > 0)
  {
    require_shape(spec.constraint_A, spec.constraint_A.rows(), n, "params.constraint_A");
  }
  const bool has_wall = spec.guard_normal.size() > 0;
  if (has_wall)
  {
    require_shape(spec.guard_normal, n, 1, "params.guard.normal");
    if (spec.constraint_B.rows() == 0)
    {
      throw SchemaError("params.constraint_B", "a wall needs a constraint matrix B");
    }
    require_shape(spec.constraint_B, spec.constraint_B.rows(), n, "params.constraint_B");
    if (spec.guard_normal.norm() == 0.0)
    {
      throw SchemaError("params.guard.normal", "must be nonzero");
    }
  }

  auto checked_constraint = [rank_tol](const Eigen::MatrixXd& m, const std::string& field) {
    try
    {
      return ConstraintMatrix(m, rank_tol);
    }
    catch (const Error& e)
    {
      throw Error(e.kind(), field + ": " + e.what());
    }
  };
  const ConstraintMatrix a = spec.constraint_A.rows() > 0
                                 ? checked_constraint(spec.constraint_A, "params.constraint_A")
                                 : ConstraintMatrix::empty(n);

  const Eigen::MatrixXd g0 = spec.metric;
  const std::vector<Eigen::MatrixXd> slopes = spec.metric_slopes;
  auto metric_at = [g0, slopes](const Vector& x) {
    if (slopes.empty())
    {
      return Metric(g0);
    }
    Eigen::MatrixXd g = g0;
    for (std::size_t k = 0; k < slopes.size(); ++k)
    {
      g += x(static_cast<Eigen::Index>(k)) * slopes[k];
    }
    return Metric(g);
  };

  const Vector wall_point = spec.wall_point.value_or(Vector::Zero(n));
  if (wall_point.size() != n)
  {
    throw SchemaError("params.wall_point", "dimension mismatch");
  }
  try
  {
    (void)metric_at(wall_point);
  }
  catch (const Error& e)
  {
    throw SchemaError("params.metric", e.what());
  }

  MechanicalSystem sys;
  sys.kind = SystemKind::Generic;
  sys.config_dim = n;
  sys.velocity_dim = n;
  sys.constant_metric = slopes.empty();
  sys.constant_constraint = true;

  if (slopes.empty())
  {
    const Metric metric(g0);
    sys.metric_at = [metric](const Vector&) { return metric; };
  }
  else
  {
    sys.metric_at = metric_at;
  }
  const Vector lin = spec.potential_linear;
  const Eigen::MatrixXd stiff = 0.5 * (spec.potential_stiffness + spec.potential_stiffness.transpose());
  sys.potential_at = [lin, stiff](const Vector& x) { return lin.dot(x) + 0.5 * x.dot(stiff * x); };
  sys.potential_gradient = [lin, stiff](const Vector& x) -> Vector { return lin + stiff * x; };
  sys.constraint_A_at = [a](const Vector&) { return a; };
  sys.config_rate = [](const Vector&, const Vector& v) { return v; };

  if (has_wall)
  {
    const ConstraintMatrix b = checked_constraint(spec.constraint_B, "params.constraint_B");
    const NestingReport nesting = validate_nesting(a, b, nesting_tol);
    if (!nesting.passed)
    {
      std::ostringstream os;
      os << "ker B is not contained in ker A at the wall point (max |A z| = " << nesting.max_residual << ")";
      throw Error(ErrorKind::NestingViolated, os.str());
    }
    const double c0 = spec.guard_offset;
    const Vector c = spec.guard_normal;
    sys.wall = WallSpec{
        [c0, c](const Vector& x) { return c0 + c.dot(x); },
        [c](const Vector&, const Vector& v) { return c.dot(v); },
        [b](const Vector&) { return b; },
    };
  }

  for (Eigen::Index i = 0; i < n; ++i)
  {
    sys.config_labels.push_back("x_" + std::to_string(i + 1));
    sys.velocity_labels.push_back("v_" + std::to_string(i + 1));
  }
  return sys;
}

}  // namespace nhimpact
