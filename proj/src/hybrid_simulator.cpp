#include "nhimpact/hybrid_simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nhimpact
{

namespace
{

double guard_of(const MechanicalSystem& sys, const FlowState& s)
{
  return sys.wall->guard(s.x);
}

// On the wall and moving into it. Points where the motion is leaving the
// wall are the previous release, not the crossing being refined.
bool arrived(const MechanicalSystem& sys, const FlowState& s, double h, double event_tol)
{
  return std::abs(h) <= event_tol && sys.wall->guard_rate(s.x, s.v) <= 0.0;
}

double grazing_threshold(const SimulationSettings& settings, const Vector& v)
{
  return settings.graze_tol * std::max(1.0, v.norm());
}

struct RunState
{
  Trajectory traj;

  void finish(TrajectoryStatus status, std::string message = {}, std::optional<ErrorKind> failure = {})
  {
    traj.status = status;
    traj.message = std::move(message);
    traj.failure = failure;
  }

  void push_sample(FlowState s)
  {
    if (!traj.samples.empty() && traj.samples.back().t >= s.t)
    {
      traj.samples.back() = std::move(s);
    }
    else
    {
      traj.samples.push_back(std::move(s));
    }
  }
};

}  // namespace

std::string_view to_string(TrajectoryStatus status)
{
  switch (status)
  {
    case TrajectoryStatus::Completed:
      return "completed";
    case TrajectoryStatus::ZenoCap:
      return "zeno_cap";
    case TrajectoryStatus::GrazingAbort:
      return "grazing_abort";
    case TrajectoryStatus::Error:
      return "error";
  }
  return "unknown";
}

std::optional<CrossingBracket> detect_crossing(const MechanicalSystem& sys, const FlowState& s,
                                               const FlowState& next, double event_tol)
{
  if (!sys.wall)
  {
    return std::nullopt;
  }
  const double h0 = guard_of(sys, s);
  const double h1 = guard_of(sys, next);
  // A state just released from the wall may sit a rounding error below it.
  if (h1 < 0.0 && h0 >= -event_tol && h1 < h0)
  {
    return CrossingBracket{s, 0.0, next.t - s.t};
  }
  return std::nullopt;
}

std::optional<CrossingBracket> detect_crossing(const MechanicalSystem& sys, const FlowState& s, double dt,
                                               const IntegratorSettings& cfg, double event_tol)
{
  if (!sys.wall)
  {
    return std::nullopt;
  }
  return detect_crossing(sys, s, step(sys, s, dt, cfg), event_tol);
}

RefinedCrossing refine_crossing(const MechanicalSystem& sys, const CrossingBracket& bracket, double event_tol,
                                const IntegratorSettings& cfg, std::size_t max_bisections)
{
  auto state_at = [&](double sub_dt) {
    return sub_dt == 0.0 ? bracket.start : step(sys, bracket.start, sub_dt, cfg);
  };

  double lo = bracket.dt_lo;
  double hi = bracket.dt_hi;
  FlowState lo_state = state_at(lo);
  if (arrived(sys, lo_state, guard_of(sys, lo_state), event_tol) || hi <= lo)
  {
    return {lo_state.t, lo_state, 0};
  }

  for (std::size_t it = 1; it <= max_bisections; ++it)
  {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi))
    {
      break;
    }
    FlowState mid_state = state_at(mid);
    const double h = guard_of(sys, mid_state);
    if (arrived(sys, mid_state, h, event_tol))
    {
      return {mid_state.t, std::move(mid_state), it};
    }
    if (h > 0.0 || (h >= -event_tol && sys.wall->guard_rate(mid_state.x, mid_state.v) > 0.0))
    {
      lo = mid;
    }
    else
    {
      hi = mid;
    }
  }

  std::ostringstream os;
  os << "guard crossing could not be refined to " << event_tol << " in [" << bracket.start.t + lo << ", "
     << bracket.start.t + hi << "]";
  throw Error(ErrorKind::BisectionStall, os.str());
}

Trajectory simulate(const MechanicalSystem& sys, const FlowState& initial, double t_max,
                    const IntegratorSettings& integrator, const SimulationSettings& settings)
{
  RunState run;
  FlowState s = initial;
  run.traj.samples.push_back(s);

  if (!(integrator.dt > 0.0))
  {
    run.finish(TrajectoryStatus::Error, "integrator dt must be positive", ErrorKind::SchemaError);
    return run.traj;
  }
  if (constraint_drift(sys, s) > settings.admissibility_tol * (1.0 + s.v.lpNorm<Eigen::Infinity>()))
  {
    run.finish(TrajectoryStatus::Error, "initial velocity violates A(x) v = 0",
               ErrorKind::InadmissiblePreVelocity);
    return run.traj;
  }
  if (sys.wall)
  {
    const double h0 = guard_of(sys, s);
    if (h0 < -settings.event_tol ||
        (std::abs(h0) <= settings.event_tol && sys.wall->guard_rate(s.x, s.v) <= 0.0))
    {
      run.finish(TrajectoryStatus::Error, "initial state is behind the wall or on it without separating",
                 ErrorKind::WallPenetration);
      return run.traj;
    }
  }

  double last_tau = -std::numeric_limits<double>::infinity();
  try
  {
    while (s.t < t_max)
    {
      const double remaining = t_max - s.t;
      const bool last_step = remaining <= integrator.dt;
      FlowState next = step(sys, s, last_step ? remaining : integrator.dt, integrator);
      if (last_step)
      {
        next.t = t_max;
      }

      const auto bracket = detect_crossing(sys, s, next, settings.event_tol);
      if (!bracket)
      {
        s = std::move(next);
        run.push_sample(s);
        continue;
      }

      RefinedCrossing hit = refine_crossing(sys, *bracket, settings.event_tol, integrator, settings.max_bisections);
      const FlowState& at = hit.state;
      const double rate = sys.wall->guard_rate(at.x, at.v);
      const double graze = grazing_threshold(settings, at.v);
      if (rate >= -graze)
      {
        std::ostringstream os;
        os << "approach rate dh/dt = " << rate << " at t = " << hit.tau << " is not transversal";
        run.finish(TrajectoryStatus::GrazingAbort, os.str(), ErrorKind::GrazingImpact);
        return run.traj;
      }
      if (run.traj.events.size() >= settings.max_events)
      {
        run.finish(TrajectoryStatus::ZenoCap, "event cap reached");
        return run.traj;
      }
      if (hit.tau - last_tau < settings.min_flight_time)
      {
        run.finish(TrajectoryStatus::ZenoCap, "flight time between impacts below minimum");
        return run.traj;
      }

      const Metric g = sys.metric_at(at.x);
      const ConstraintMatrix a = sys.constraint_A_at(at.x);
      const ConstraintMatrix b = sys.wall->constraint_B_at(at.x);
      const ImpactMatrix r = impact_matrix(g, a, b, settings.mu, settings.nesting_tol);
      const Vector v_plus = apply_impact(r, at.v, a, settings.admissibility_tol);

      ImpactEvent ev;
      ev.tau = hit.tau;
      ev.x_tau = at.x;
      ev.v_minus = at.v;
      ev.v_plus = v_plus;
      ev.T_minus = kinetic_energy(g, at.v);
      ev.T_plus = kinetic_energy(g, v_plus);
      ev.guard_rate = rate;
      ev.mu = settings.mu;
      run.traj.events.push_back(ev);
      last_tau = hit.tau;

      s = FlowState{hit.tau, at.x, v_plus};
      run.push_sample(s);

      const double rate_after = sys.wall->guard_rate(s.x, s.v);
      if (rate_after < -graze)
      {
        std::ostringstream os;
        os << "post-impact velocity points into the wall (dh/dt = " << rate_after << ")";
        run.finish(TrajectoryStatus::Error, os.str(), ErrorKind::WallPenetration);
        return run.traj;
      }
      if (rate_after <= graze)
      {
        run.finish(TrajectoryStatus::ZenoCap, "resting contact: no separation after impact");
        return run.traj;
      }
    }
  }
  catch (const Error& e)
  {
    run.finish(TrajectoryStatus::Error, e.what(), e.kind());
    return run.traj;
  }

  run.finish(TrajectoryStatus::Completed);
  return run.traj;
}

AuditReport audit(const MechanicalSystem& sys, const Trajectory& traj)
{
  AuditReport report;
  report.event_count = traj.events.size();
  report.sample_count = traj.samples.size();

  for (const auto& ev : traj.events)
  {
    if (ev.mu == 1.0)
    {
      const double denom = ev.T_minus > 0.0 ? ev.T_minus : 1.0;
      report.max_elastic_energy_error = std::max(report.max_elastic_energy_error,
                                                 std::abs(ev.T_plus - ev.T_minus) / denom);
    }
    else
    {
      report.max_energy_gain = std::max(report.max_energy_gain, ev.T_plus - ev.T_minus);
    }
    if (sys.wall)
    {
      const Metric g = sys.metric_at(ev.x_tau);
      const KernelBasis zb = kernel_basis(sys.wall->constraint_B_at(ev.x_tau));
      const Vector jump = ev.v_plus - ev.v_minus;
      const Vector residual = zb.basis.transpose() * (g.matrix() * jump);
      report.max_jump_orthogonality =
          std::max(report.max_jump_orthogonality, residual.size() ? residual.lpNorm<Eigen::Infinity>() : 0.0);
    }
  }

  std::size_t next_event = 0;
  double arc_energy = 0.0;
  bool arc_open = false;
  for (const auto& s : traj.samples)
  {
    report.max_constraint_drift = std::max(report.max_constraint_drift, constraint_drift(sys, s));
    const double e = energy(sys, s);
    const bool at_event = next_event < traj.events.size() && s.t >= traj.events[next_event].tau;
    if (!arc_open || at_event)
    {
      arc_energy = e;
      arc_open = true;
      if (at_event)
      {
        ++next_event;
      }
      continue;
    }
    const double denom = arc_energy != 0.0 ? std::abs(arc_energy) : 1.0;
    report.max_arc_energy_drift = std::max(report.max_arc_energy_drift, std::abs(e - arc_energy) / denom);
  }
  return report;
}

}  // namespace nhimpact
