#include "nhimpact/commands.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <random>

#include "nhimpact/error.hpp"

namespace nhimpact
{

namespace
{

constexpr double kAlgebraTol = 1e-10;
constexpr int kOracleSamples = 200;

void print_check(std::ostream& out, const CheckResult& c)
{
  out << (c.passed ? "PASS " : "FAIL ") << c.name << " value=" << format_double(c.value)
      << " threshold=" << format_double(c.threshold) << '\n';
}

CheckResult at_most(std::string name, double value, double threshold)
{
  return {std::move(name), value <= threshold, value, threshold};
}

Vector random_vector(std::mt19937_64& rng, Eigen::Index n)
{
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i)
  {
    v(i) = unit(rng);
  }
  return v;
}

// Oracle-agreement checks for the two built-in ball scenes.
void ball_scene_checks(const SceneConfig& config, const MechanicalSystem& sys, std::mt19937_64& rng,
                       std::vector<CheckResult>& checks)
{
  const BallParams& p = *sys.ball;
  const Vector x0 = initial_flow_state(config).x;
  const Metric g = sys.metric_at(x0);
  const ConstraintMatrix a = sys.constraint_A_at(x0);
  const ConstraintMatrix b = sys.wall->constraint_B_at(x0);

  if (sys.kind == SystemKind::BallFloor)
  {
    double closed_form_err = 0.0;
    double momentum_err = 0.0;
    for (double mu : {config.mu, 1.0})
    {
      const ImpactMatrix r = impact_matrix(g, a, b, mu);
      for (int k = 0; k < kOracleSamples; ++k)
      {
        const Vector v = random_vector(rng, 6);
        const Vector v_plus = apply_impact(r, v, a);
        const BallVelocity before{v.head<3>(), v.tail<3>()};
        const BallVelocity after = ball_floor_impact_closed_form(p, before, mu);
        Vector expected(6);
        expected << after.v_S, after.omega;
        closed_form_err = std::max(closed_form_err, max_abs(v_plus - expected));
        if (mu == 1.0)
        {
          const BallVelocity generic_after{v_plus.head<3>(), v_plus.tail<3>()};
          momentum_err = std::max(momentum_err, max_abs(contact_angular_momentum(p, generic_after) -
                                                        contact_angular_momentum(p, before)));
        }
      }
    }
    checks.push_back(at_most("closed_form_floor_agreement", closed_form_err, kAlgebraTol));
    checks.push_back(at_most("contact_angular_momentum", momentum_err, kAlgebraTol));
  }
  else
  {
    const ImpactMatrix r = impact_matrix(g, a, b, 1.0);
    double closed_form_err = 0.0;
    double rolling_err = 0.0;
    for (int k = 0; k < kOracleSamples; ++k)
    {
      const Vector s = random_vector(rng, 3);
      const ReducedWallState before{s(0), s(1), s(2)};
      const Vector v = rolling_velocity_completion(p, before);
      const Vector v_plus = apply_impact(r, v, a);
      const Vector expected = rolling_velocity_completion(p, ball_wall_impact_closed_form(p, before));
      closed_form_err = std::max(closed_form_err, max_abs(v_plus - expected));
      rolling_err = std::max(rolling_err, max_abs(a.matrix() * v_plus));
    }
    checks.push_back(at_most("closed_form_wall_agreement", closed_form_err, kAlgebraTol));
    checks.push_back(at_most("post_impact_rolling", rolling_err, kAlgebraTol));
  }
}

}  // namespace

std::vector<CheckResult> run_invariant_suite(const SceneConfig& config, unsigned seed)
{
  std::vector<CheckResult> checks;
  std::mt19937_64 rng(seed);

  // Systems are assembled without the nesting gate so the suite can report
  // a violation instead of refusing the scene.
  GenericSystemSpec relaxed;
  MechanicalSystem sys;
  if (const auto* generic = std::get_if<GenericScene>(&config.scene))
  {
    relaxed = generic->spec;
    relaxed.guard_normal.resize(0);
    relaxed.constraint_B.resize(0, relaxed.dimension);
    sys = generic_system_from_config(relaxed, config.tolerances.rank_tol);
  }
  else
  {
    sys = build_system(config);
  }
  const FlowState s0 = initial_flow_state(config);

  std::optional<Metric> g;
  try
  {
    g = sys.metric_at(s0.x);
    checks.push_back({"metric_spd", true, 0.0, 0.0});
  }
  catch (const Error&)
  {
    checks.push_back({"metric_spd", false, 0.0, 0.0});
    return checks;
  }
  const ConstraintMatrix a = sys.constraint_A_at(s0.x);
  const double drift = a.is_empty() ? 0.0 : max_abs(a.matrix() * s0.v);
  checks.push_back(at_most("initial_admissible", drift,
                           config.tolerances.admissibility_tol * (1.0 + max_abs(s0.v))));

  std::optional<ConstraintMatrix> b;
  if (const auto* generic = std::get_if<GenericScene>(&config.scene))
  {
    if (generic->spec.guard_normal.size() > 0)
    {
      b = ConstraintMatrix(generic->spec.constraint_B, config.tolerances.rank_tol);
      const double h0 = generic->spec.guard_offset + generic->spec.guard_normal.dot(s0.x);
      checks.push_back({"initial_guard_nonnegative", h0 >= -config.tolerances.event_tol, h0, 0.0});
    }
  }
  else
  {
    b = sys.wall->constraint_B_at(s0.x);
    const double h0 = sys.wall->guard(s0.x);
    checks.push_back({"initial_guard_nonnegative", h0 >= -config.tolerances.event_tol, h0, 0.0});
  }
  if (!b)
  {
    return checks;
  }

  const NestingReport nesting = validate_nesting(a, *b, config.tolerances.nesting_tol);
  checks.push_back({"nesting_kerB_in_kerA", nesting.passed, nesting.max_residual, nesting.threshold});
  if (!nesting.passed)
  {
    return checks;
  }

  const Eigen::MatrixXd& gm = g->matrix();
  const Eigen::Index n = gm.rows();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const Projector p = g_projector(*g, *b);
  const Eigen::MatrixXd& pm = p.entries;
  const double p_scale = std::max(1.0, max_abs(pm));
  checks.push_back(at_most("projector_idempotent", max_abs(pm * pm - pm) / p_scale, kAlgebraTol));
  checks.push_back(
      at_most("projector_g_self_adjoint", max_abs(gm * pm - pm.transpose() * gm) / (max_abs(gm) * p_scale),
              kAlgebraTol));
  if (!a.is_empty())
  {
    checks.push_back(at_most("AP_equals_A", max_abs(a.matrix() * pm - a.matrix()) / max_abs(a.matrix()), 1e-9));
  }

  const KernelBasis zb = kernel_basis(*b);
  const Eigen::MatrixXd gz = zb.basis.transpose() * gm * zb.basis;
  const Eigen::MatrixXd kernel_side =
      id - zb.basis * gz.ldlt().solve(zb.basis.transpose() * gm);
  checks.push_back(at_most("projector_kernel_route_agreement", max_abs(pm - kernel_side) / p_scale, kAlgebraTol));

  const ImpactMatrix r = impact_matrix(*g, a, *b, config.mu, config.tolerances.nesting_tol);
  const ImpactMatrix r_elastic = impact_matrix(*g, a, *b, 1.0, config.tolerances.nesting_tol);
  const ImpactMatrix r_plastic = impact_matrix(*g, a, *b, 0.0, config.tolerances.nesting_tol);
  checks.push_back(at_most("impact_identity_on_kerB", max_abs(r.entries * zb.basis - zb.basis), kAlgebraTol));
  checks.push_back(at_most("elastic_involution", max_abs(r_elastic.entries * r_elastic.entries - id), kAlgebraTol));

  const KernelBasis za = kernel_basis(a);
  double orthogonality = 0.0;
  double energy_err = 0.0;
  double plastic = 0.0;
  for (int k = 0; k < kOracleSamples; ++k)
  {
    const Vector v = za.basis * random_vector(rng, za.dim());
    const Vector v_plus = apply_impact(r, v, a);
    orthogonality = std::max(orthogonality, max_abs(zb.basis.transpose() * gm * (v_plus - v)));
    const double t_minus = kinetic_energy(*g, v);
    const double t_plus = kinetic_energy(*g, v_plus);
    energy_err = std::max(energy_err, config.mu == 1.0 ? std::abs(t_plus - t_minus) / t_minus
                                                       : std::max(0.0, t_plus - t_minus));
    plastic = std::max(plastic, max_abs(b->matrix() * apply_impact(r_plastic, v, a)));
  }
  checks.push_back(at_most("jump_g_orthogonal_to_kerB", orthogonality, 1e-9));
  checks.push_back(at_most(config.mu == 1.0 ? "elastic_energy_conserved" : "energy_not_increased", energy_err,
                           1e-12));
  checks.push_back(at_most("plastic_lands_in_kerB", plastic, 1e-9));

  if (sys.ball)
  {
    ball_scene_checks(config, sys, rng, checks);
  }
  return checks;
}

int cmd_validate(const std::filesystem::path& scene, std::ostream& out, std::ostream& err)
{
  try
  {
    const SceneConfig config = parse_scene(scene);
    const auto checks = run_invariant_suite(config);
    bool all = true;
    for (const auto& c : checks)
    {
      print_check(out, c);
      all = all && c.passed;
    }
    out << (all ? "all checks passed" : "some checks failed") << '\n';
    return all ? 0 : 2;
  }
  catch (const Error& e)
  {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  }
}

int cmd_simulate(const SimulateOptions& opts, std::ostream& out, std::ostream& err)
{
  try
  {
    SceneConfig config = parse_scene(opts.scene);
    if (opts.t_max)
    {
      if (!(*opts.t_max >= 0.0))
      {
        throw SchemaError("--t-max", "must be >= 0");
      }
      config.t_max = *opts.t_max;
    }
    if (opts.dt)
    {
      if (!(*opts.dt > 0.0))
      {
        throw SchemaError("--dt", "must be positive");
      }
      config.integrator.dt = *opts.dt;
    }

    const MechanicalSystem sys = build_system(config);
    const Trajectory traj = simulate(sys, initial_flow_state(config), config.t_max, config.integrator,
                                     config.simulation());

    std::ofstream traj_file(opts.out);
    std::ofstream events_file(opts.events);
    if (!traj_file || !events_file)
    {
      throw Error(ErrorKind::IoError, "cannot open output files");
    }
    write_trajectory_csv(traj_file, sys, traj);
    write_events_csv(events_file, sys, traj);

    const AuditReport report = audit(sys, traj);
    out << "status: " << to_string(traj.status) << '\n';
    if (!traj.message.empty())
    {
      out << "message: " << traj.message << '\n';
    }
    out << "samples: " << report.sample_count << '\n'
        << "events: " << report.event_count << '\n'
        << "max_elastic_energy_error: " << format_double(report.max_elastic_energy_error) << '\n'
        << "max_energy_gain: " << format_double(report.max_energy_gain) << '\n'
        << "max_jump_orthogonality: " << format_double(report.max_jump_orthogonality) << '\n'
        << "max_constraint_drift: " << format_double(report.max_constraint_drift) << '\n'
        << "max_arc_energy_drift: " << format_double(report.max_arc_energy_drift) << '\n';

    if (traj.failure)
    {
      err << "error: " << to_string(*traj.failure) << ": " << traj.message << '\n';
      return exit_code(*traj.failure);
    }
    return 0;
  }
  catch (const Error& e)
  {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  }
}

int cmd_impact_map(const ImpactMapOptions& opts, std::ostream& out, std::ostream& err)
{
  try
  {
    const Metric g(read_matrix_file(opts.metric));
    const Eigen::Index n = g.dim();

    Eigen::MatrixXd a_raw(0, n);
    if (opts.constraint_a)
    {
      a_raw = read_matrix_file(*opts.constraint_a);
      if (a_raw.size() == 0 || max_abs(a_raw) == 0.0)
      {
        a_raw.resize(0, n);
      }
    }
    const Eigen::MatrixXd b_raw = read_matrix_file(opts.constraint_b);
    if (b_raw.cols() != n || (a_raw.rows() > 0 && a_raw.cols() != n))
    {
      throw SchemaError("--constraint-b", "column count must match the metric dimension " + std::to_string(n));
    }
    const ConstraintMatrix a = a_raw.rows() > 0 ? ConstraintMatrix(a_raw) : ConstraintMatrix::empty(n);
    const ConstraintMatrix b(b_raw);

    const NestingReport nesting = validate_nesting(a, b);
    const ImpactMatrix r = impact_matrix(g, a, b, opts.mu);
    const Eigen::MatrixXd& pm = r.projector;
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);

    out << "# P\n";
    write_matrix(out, pm);
    out << "# R = I - (1 + mu) P, mu = " << format_double(opts.mu) << '\n';
    write_matrix(out, r.entries);

    const double p_scale = std::max(1.0, max_abs(pm));
    std::vector<CheckResult> checks;
    checks.push_back({"nesting_kerB_in_kerA", nesting.passed, nesting.max_residual, nesting.threshold});
    checks.push_back(at_most("projector_idempotent", max_abs(pm * pm - pm) / p_scale, kAlgebraTol));
    checks.push_back(at_most("projector_g_self_adjoint",
                             max_abs(g.matrix() * pm - pm.transpose() * g.matrix()) / (max_abs(g.matrix()) * p_scale),
                             kAlgebraTol));
    if (opts.mu == 1.0)
    {
      checks.push_back(at_most("elastic_involution", max_abs(r.entries * r.entries - id), kAlgebraTol));
    }
    const KernelBasis zb = kernel_basis(b);
    checks.push_back(at_most("impact_identity_on_kerB", max_abs(r.entries * zb.basis - zb.basis), kAlgebraTol));

    if (!a.is_empty())
    {
      const Eigen::MatrixXd za_basis = kernel_basis(a).basis;
      checks.push_back(at_most("R_maps_kerA_into_kerA", max_abs(a.matrix() * r.entries * za_basis),
                               1e-9 * max_abs(a.matrix())));
    }

    out << "# report\n";
    bool all = true;
    for (const auto& c : checks)
    {
      print_check(out, c);
      all = all && c.passed;
    }
    const KernelBasis za = kernel_basis(a);
    const double on_ker_a = za.dim() ? max_abs(r.entries * za.basis - za.basis) : 0.0;
    out << "identity_on_kerA: " << (on_ker_a <= kAlgebraTol ? "yes" : "no") << " deviation=" << format_double(on_ker_a)
        << '\n';
    return all ? 0 : 3;
  }
  catch (const Error& e)
  {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  }
}

}  // namespace nhimpact
