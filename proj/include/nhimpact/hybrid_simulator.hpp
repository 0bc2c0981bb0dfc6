#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "nhimpact/constrained_dynamics.hpp"
#include "nhimpact/error.hpp"
#include "nhimpact/mechanical_models.hpp"

namespace nhimpact
{

struct SimulationSettings
{
  double mu = 1.0;
  double event_tol = 1e-12;
  // Approach rates with |dh/dt| <= graze_tol * max(1, |v|) count as grazing.
  double graze_tol = 1e-8;
  std::size_t max_events = 10000;
  double min_flight_time = 1e-9;
  std::size_t max_bisections = 200;
  double rank_tol = kDefaultRankTol;
  double nesting_tol = kDefaultNestingTol;
  double admissibility_tol = kDefaultAdmissibilityTol;

  bool operator==(const SimulationSettings&) const = default;
};

struct ImpactEvent
{
  double tau = 0.0;
  Vector x_tau;
  Vector v_minus;
  Vector v_plus;
  double T_minus = 0.0;
  double T_plus = 0.0;
  double guard_rate = 0.0;  // dh/dt just before impact
  double mu = 1.0;
};

enum class TrajectoryStatus
{
  Completed,
  ZenoCap,
  GrazingAbort,
  Error,
};

std::string_view to_string(TrajectoryStatus status);

struct Trajectory
{
  std::vector<FlowState> samples;
  std::vector<ImpactEvent> events;
  TrajectoryStatus status = TrajectoryStatus::Completed;
  std::optional<ErrorKind> failure;  // set for GrazingAbort and Error
  std::string message;
};

/// Sub-step interval [dt_lo, dt_hi] measured from `start` that contains the
/// first zero of the guard.
struct CrossingBracket
{
  FlowState start;
  double dt_lo = 0.0;
  double dt_hi = 0.0;
};

struct RefinedCrossing
{
  double tau = 0.0;
  FlowState state;  // at tau, carrying the pre-impact velocity
  std::size_t iterations = 0;
};

// Integrates one step of size dt from s and reports a bracket when the
// guard goes from >= -event_tol to < 0 over it.
std::optional<CrossingBracket> detect_crossing(const MechanicalSystem& sys, const FlowState& s, double dt,
                                               const IntegratorSettings& cfg, double event_tol = 1e-12);

// Same, for a step already taken (s -> next).
std::optional<CrossingBracket> detect_crossing(const MechanicalSystem& sys, const FlowState& s,
                                               const FlowState& next, double event_tol = 1e-12);

/// Bisection on the sub-step length, re-integrating from bracket.start,
/// until |h| <= event_tol at a point moving into the wall. Throws
/// BisectionStall when the bracket stops shrinking or max_bisections is
/// exhausted.
RefinedCrossing refine_crossing(const MechanicalSystem& sys, const CrossingBracket& bracket, double event_tol,
                                const IntegratorSettings& cfg, std::size_t max_bisections = 200);

/// Integrate, detect, reflect. Failures during the run (grazing contact,
/// nesting violation at the impact point, a post-impact velocity pointing
/// into the wall) end the run and are reported in the trajectory status.
Trajectory simulate(const MechanicalSystem& sys, const FlowState& initial, double t_max,
                    const IntegratorSettings& integrator, const SimulationSettings& settings);

struct AuditReport
{
  std::size_t event_count = 0;
  std::size_t sample_count = 0;
  double max_elastic_energy_error = 0.0;  // |T+ - T-| / T- over events with mu = 1
  double max_energy_gain = 0.0;           // max(T+ - T-) over events with mu < 1
  double max_jump_orthogonality = 0.0;    // max |Z_B^T G (v+ - v-)|
  double max_constraint_drift = 0.0;      // max |A(x) v| over samples
  double max_arc_energy_drift = 0.0;      // relative T + V drift within smooth arcs
};

AuditReport audit(const MechanicalSystem& sys, const Trajectory& traj);

}  // namespace nhimpact
