#include "nhimpact/constrained_dynamics.hpp"

#include <Eigen/Cholesky>

#include "nhimpact/error.hpp"

namespace nhimpact
{

namespace
{

constexpr double kSchurPivotRatio = 1e-14;

double fd_increment(const Vector& x, double fd_step)
{
  return fd_step * (1.0 + x.norm());
}

// f(x, v) = -(dG/dt) v + grad_x (v^T G(x) v) / 2, by central differences.
// The gradient part assumes the velocity components are coordinate rates,
// which holds for every system whose metric varies.
Vector metric_bias(const MechanicalSystem& sys, const Vector& x, const Vector& v, double fd_step)
{
  const Eigen::Index n = sys.velocity_dim;
  if (sys.constant_metric)
  {
    return Vector::Zero(n);
  }
  const double h = fd_increment(x, fd_step);

  const Vector xdot = sys.config_rate(x, v);
  const Eigen::MatrixXd g_plus = sys.metric_at(x + h * xdot).matrix();
  const Eigen::MatrixXd g_minus = sys.metric_at(x - h * xdot).matrix();
  Vector f = -((g_plus - g_minus) / (2.0 * h)) * v;

  for (Eigen::Index k = 0; k < n; ++k)
  {
    Vector xp = x;
    Vector xm = x;
    xp(k) += h;
    xm(k) -= h;
    const double tp = v.dot(sys.metric_at(xp).matrix() * v);
    const double tm = v.dot(sys.metric_at(xm).matrix() * v);
    f(k) += 0.5 * (tp - tm) / (2.0 * h);
  }
  return f;
}

// (dA/dt) v along the motion.
Vector constraint_rate_term(const MechanicalSystem& sys, const Vector& x, const Vector& v,
                            Eigen::Index rows, double fd_step)
{
  if (sys.constant_constraint || rows == 0)
  {
    return Vector::Zero(rows);
  }
  const double h = fd_increment(x, fd_step);
  const Vector xdot = sys.config_rate(x, v);
  const Eigen::MatrixXd a_plus = sys.constraint_A_at(x + h * xdot).matrix();
  const Eigen::MatrixXd a_minus = sys.constraint_A_at(x - h * xdot).matrix();
  return ((a_plus - a_minus) / (2.0 * h)) * v;
}

}  // namespace

Acceleration accel_and_multipliers(const MechanicalSystem& sys, const Vector& x, const Vector& v,
                                   double fd_step)
{
  const Metric g = sys.metric_at(x);
  const ConstraintMatrix a = sys.constraint_A_at(x);

  const Vector force = metric_bias(sys, x, v, fd_step) - sys.potential_gradient(x);
  const Vector free_accel = g.solve(force);
  if (a.is_empty())
  {
    return {free_accel, Vector(0)};
  }

  const Eigen::MatrixXd& am = a.matrix();
  const Eigen::MatrixXd ginv_at = g.solve(am.transpose());
  Eigen::MatrixXd schur = am * ginv_at;
  schur = 0.5 * (schur + schur.transpose());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(schur);
  const Vector pivots = ldlt.vectorD().cwiseAbs();
  if (ldlt.info() != Eigen::Success || !(pivots.minCoeff() > kSchurPivotRatio * pivots.maxCoeff()))
  {
    throw Error(ErrorKind::SingularKKT, "A G^-1 A^T is numerically singular");
  }

  const Vector rhs = -constraint_rate_term(sys, x, v, a.rows(), fd_step) - am * free_accel;
  Vector lambda = ldlt.solve(rhs);
  Vector accel = free_accel + ginv_at * lambda;
  return {std::move(accel), std::move(lambda)};
}

Vector project_velocity(const Metric& g, const ConstraintMatrix& a, const Vector& v)
{
  if (a.is_empty())
  {
    return v;
  }
  const Projector p = g_projector(g, a);
  return v - p.entries * v;
}

FlowState step(const MechanicalSystem& sys, const FlowState& s, double dt, const IntegratorSettings& cfg)
{
  struct Rate
  {
    Vector dx;
    Vector dv;
  };
  auto rate = [&](const Vector& x, const Vector& v) {
    return Rate{sys.config_rate(x, v), accel_and_multipliers(sys, x, v, cfg.fd_step).a};
  };

  const Rate k1 = rate(s.x, s.v);
  const Rate k2 = rate(s.x + 0.5 * dt * k1.dx, s.v + 0.5 * dt * k1.dv);
  const Rate k3 = rate(s.x + 0.5 * dt * k2.dx, s.v + 0.5 * dt * k2.dv);
  const Rate k4 = rate(s.x + dt * k3.dx, s.v + dt * k3.dv);

  FlowState next;
  next.t = s.t + dt;
  next.x = s.x + (dt / 6.0) * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
  next.v = s.v + (dt / 6.0) * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
  if (sys.normalize_config)
  {
    sys.normalize_config(next.x);
  }
  next.v = project_velocity(sys.metric_at(next.x), sys.constraint_A_at(next.x), next.v);
  return next;
}

double kinetic_energy(const MechanicalSystem& sys, const FlowState& s)
{
  return kinetic_energy(sys.metric_at(s.x), s.v);
}

double energy(const MechanicalSystem& sys, const FlowState& s)
{
  return kinetic_energy(sys, s) + sys.potential_at(s.x);
}

double constraint_drift(const MechanicalSystem& sys, const FlowState& s)
{
  const ConstraintMatrix a = sys.constraint_A_at(s.x);
  return a.is_empty() ? 0.0 : max_abs(a.matrix() * s.v);
}

}  // namespace nhimpact
