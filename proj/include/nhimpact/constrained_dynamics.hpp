#pragma once

#include <Eigen/Dense>

#include "nhimpact/constraint_geometry.hpp"
#include "nhimpact/mechanical_models.hpp"

namespace nhimpact
{

struct FlowState
{
  double t = 0.0;
  Vector x;
  Vector v;
};

struct IntegratorSettings
{
  double dt = 1e-4;
  double drift_tol = 1e-10;
  // Finite-difference step scale; the actual step is fd_step * (1 + |x|).
  double fd_step = 1e-6;

  bool operator==(const IntegratorSettings&) const = default;
};

struct Acceleration
{
  Vector a;
  Vector lambda;  // constraint multipliers, one per row of A
};

/// Solves the Lagrange-d'Alembert equations in multiplier form
///
///   G a = f(x, v) - grad V + A^T lambda,    A a + (dA/dt) v = 0,
///
/// where f = -(dG/dt) v + d/dx (v^T G v) / 2 for chart systems with a
/// position-dependent metric. The saddle system is reduced with the
/// Cholesky factor of G to the SPD Schur complement A G^-1 A^T.
Acceleration accel_and_multipliers(const MechanicalSystem& sys, const Vector& x, const Vector& v,
                                   double fd_step = 1e-6);

// v' = (I - P_A) v, the G-closest velocity with A v' = 0.
Vector project_velocity(const Metric& g, const ConstraintMatrix& a, const Vector& v);

/// One classical Runge-Kutta step of size dt, followed by configuration
/// normalization and projection of v onto ker A(x).
FlowState step(const MechanicalSystem& sys, const FlowState& s, double dt, const IntegratorSettings& cfg);

// T + V
double energy(const MechanicalSystem& sys, const FlowState& s);

double kinetic_energy(const MechanicalSystem& sys, const FlowState& s);

// max |A(x) v|
double constraint_drift(const MechanicalSystem& sys, const FlowState& s);

}  // namespace nhimpact
