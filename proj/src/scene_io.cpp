#include "nhimpact/scene_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <set>
#include <sstream>

#include "nhimpact/error.hpp"

namespace nhimpact
{

using json = nlohmann::json;

namespace
{

// ===== JSON reading =====

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed)
{
  const std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& item : obj.items())
  {
    if (!names.count(item.key()))
    {
      throw SchemaError(path.empty() ? item.key() : path + "." + item.key(), "unknown key");
    }
  }
}

const json& require_object(const json& parent, const std::string& key, const std::string& path)
{
  if (!parent.contains(key))
  {
    throw SchemaError(path, "missing");
  }
  const json& obj = parent.at(key);
  if (!obj.is_object())
  {
    throw SchemaError(path, "must be an object");
  }
  return obj;
}

double to_number(const json& value, const std::string& path)
{
  if (!value.is_number())
  {
    throw SchemaError(path, "must be a number");
  }
  const double d = value.get<double>();
  if (!std::isfinite(d))
  {
    throw SchemaError(path, "must be finite");
  }
  return d;
}

double read_number(const json& obj, const std::string& key, const std::string& path)
{
  if (!obj.contains(key))
  {
    throw SchemaError(path, "missing");
  }
  return to_number(obj.at(key), path);
}

double read_number_or(const json& obj, const std::string& key, const std::string& path, double fallback)
{
  return obj.contains(key) ? to_number(obj.at(key), path) : fallback;
}

Eigen::VectorXd read_vector(const json& value, const std::string& path, Eigen::Index expected = -1)
{
  if (!value.is_array())
  {
    throw SchemaError(path, "must be an array of numbers");
  }
  if (expected >= 0 && static_cast<Eigen::Index>(value.size()) != expected)
  {
    throw SchemaError(path, "expected " + std::to_string(expected) + " entries, got " +
                                std::to_string(value.size()));
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(value.size()));
  for (std::size_t i = 0; i < value.size(); ++i)
  {
    v(static_cast<Eigen::Index>(i)) = to_number(value[i], path + "[" + std::to_string(i) + "]");
  }
  return v;
}

Eigen::VectorXd read_vector_key(const json& obj, const std::string& key, const std::string& path,
                                Eigen::Index expected = -1)
{
  if (!obj.contains(key))
  {
    throw SchemaError(path, "missing");
  }
  return read_vector(obj.at(key), path, expected);
}

Eigen::MatrixXd read_matrix(const json& value, const std::string& path, Eigen::Index cols = -1)
{
  if (!value.is_array())
  {
    throw SchemaError(path, "must be an array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(value.size());
  if (rows == 0)
  {
    return Eigen::MatrixXd(0, std::max<Eigen::Index>(cols, 0));
  }
  Eigen::MatrixXd m;
  for (Eigen::Index i = 0; i < rows; ++i)
  {
    const std::string row_path = path + "[" + std::to_string(i) + "]";
    const Eigen::VectorXd row = read_vector(value[static_cast<std::size_t>(i)], row_path, cols);
    if (i == 0)
    {
      if (row.size() == 0)
      {
        throw SchemaError(row_path, "rows must be nonempty");
      }
      cols = row.size();
      m.resize(rows, cols);
    }
    m.row(i) = row.transpose();
  }
  return m;
}

BallParams read_ball_params(const json& params, bool allow_potential)
{
  if (allow_potential)
  {
    check_keys(params, "params", {"mass", "inertia_J", "radius_r", "gravity_g", "potential"});
  }
  else
  {
    check_keys(params, "params", {"mass", "inertia_J", "radius_r", "gravity_g"});
  }
  BallParams p;
  p.mass = read_number(params, "mass", "params.mass");
  p.inertia_J = read_number(params, "inertia_J", "params.inertia_J");
  p.radius_r = read_number(params, "radius_r", "params.radius_r");
  p.gravity_g = read_number(params, "gravity_g", "params.gravity_g");
  p.validate();
  return p;
}

BallState read_ball_state(const json& state)
{
  check_keys(state, "initial_state", {"position_S", "orientation", "v_S", "omega"});
  BallState s;
  s.position_S = read_vector_key(state, "position_S", "initial_state.position_S", 3);
  s.v_S = read_vector_key(state, "v_S", "initial_state.v_S", 3);
  s.omega = read_vector_key(state, "omega", "initial_state.omega", 3);
  if (state.contains("orientation"))
  {
    const Eigen::VectorXd q = read_vector(state.at("orientation"), "initial_state.orientation", 4);
    const double norm = q.norm();
    if (!(norm > 0.0))
    {
      throw SchemaError("initial_state.orientation", "quaternion must be nonzero");
    }
    s.orientation = Eigen::Quaterniond(q(0), q(1), q(2), q(3));
    if (std::abs(norm - 1.0) > 4.0 * std::numeric_limits<double>::epsilon())
    {
      s.orientation.normalize();
    }
  }
  return s;
}

PlanarPotential read_planar_potential(const json& pot)
{
  check_keys(pot, "params.potential", {"linear", "stiffness", "center"});
  PlanarPotential p;
  if (pot.contains("linear"))
  {
    p.linear = read_vector(pot.at("linear"), "params.potential.linear", 2);
  }
  if (pot.contains("stiffness"))
  {
    const Eigen::MatrixXd k = read_matrix(pot.at("stiffness"), "params.potential.stiffness", 2);
    if (k.rows() != 2)
    {
      throw SchemaError("params.potential.stiffness", "must be 2x2");
    }
    p.stiffness = k;
  }
  if (pot.contains("center"))
  {
    p.center = read_vector(pot.at("center"), "params.potential.center", 2);
  }
  return p;
}

GenericSystemSpec read_generic_spec(const json& params)
{
  check_keys(params, "params",
             {"dimension", "metric", "metric_slopes", "potential", "constraint_A", "constraint_B", "guard",
              "wall_point"});
  GenericSystemSpec spec;
  const json& dim = params.contains("dimension") ? params.at("dimension") : json();
  if (!dim.is_number_integer() || dim.get<long long>() <= 0)
  {
    throw SchemaError("params.dimension", "must be a positive integer");
  }
  const auto n = static_cast<Eigen::Index>(dim.get<long long>());
  spec.dimension = n;

  if (!params.contains("metric"))
  {
    throw SchemaError("params.metric", "missing");
  }
  spec.metric = read_matrix(params.at("metric"), "params.metric", n);
  if (spec.metric.rows() != n)
  {
    throw SchemaError("params.metric", "must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  if (params.contains("metric_slopes"))
  {
    const json& slopes = params.at("metric_slopes");
    if (!slopes.is_array())
    {
      throw SchemaError("params.metric_slopes", "must be an array of matrices");
    }
    for (std::size_t k = 0; k < slopes.size(); ++k)
    {
      const std::string path = "params.metric_slopes[" + std::to_string(k) + "]";
      spec.metric_slopes.push_back(read_matrix(slopes[k], path, n));
    }
  }

  spec.potential_linear = Eigen::VectorXd::Zero(n);
  spec.potential_stiffness = Eigen::MatrixXd::Zero(n, n);
  if (params.contains("potential"))
  {
    const json& pot = params.at("potential");
    if (!pot.is_object())
    {
      throw SchemaError("params.potential", "must be an object");
    }
    check_keys(pot, "params.potential", {"linear", "stiffness"});
    if (pot.contains("linear"))
    {
      spec.potential_linear = read_vector(pot.at("linear"), "params.potential.linear", n);
    }
    if (pot.contains("stiffness"))
    {
      spec.potential_stiffness = read_matrix(pot.at("stiffness"), "params.potential.stiffness", n);
    }
  }

  spec.constraint_A = params.contains("constraint_A")
                          ? read_matrix(params.at("constraint_A"), "params.constraint_A", n)
                          : Eigen::MatrixXd(0, n);
  spec.constraint_B = params.contains("constraint_B")
                          ? read_matrix(params.at("constraint_B"), "params.constraint_B", n)
                          : Eigen::MatrixXd(0, n);
  if (params.contains("guard"))
  {
    const json& guard = require_object(params, "guard", "params.guard");
    check_keys(guard, "params.guard", {"offset", "normal"});
    spec.guard_offset = read_number(guard, "offset", "params.guard.offset");
    spec.guard_normal = read_vector_key(guard, "normal", "params.guard.normal", n);
  }
  if (params.contains("wall_point"))
  {
    spec.wall_point = read_vector(params.at("wall_point"), "params.wall_point", n);
  }

  // Rank and metric checks happen at parse time so that errors name the
  // offending matrix.
  for (const auto& [name, m] : {std::pair<const char*, const Eigen::MatrixXd*>{"params.constraint_A", &spec.constraint_A},
                                {"params.constraint_B", &spec.constraint_B}})
  {
    if (m->rows() > 0)
    {
      try
      {
        (void)ConstraintMatrix(*m);
      }
      catch (const Error& e)
      {
        throw Error(e.kind(), std::string(name) + ": " + e.what());
      }
    }
  }
  if (spec.guard_normal.size() > 0 && spec.constraint_B.rows() == 0)
  {
    throw SchemaError("params.constraint_B", "a wall (params.guard) needs a constraint matrix B");
  }
  try
  {
    (void)Metric(spec.metric);
  }
  catch (const Error& e)
  {
    throw SchemaError("params.metric", e.what());
  }
  return spec;
}

IntegratorSettings read_integrator(const json& obj)
{
  check_keys(obj, "integrator", {"dt", "drift_tol", "fd_step"});
  IntegratorSettings cfg;
  cfg.dt = read_number_or(obj, "dt", "integrator.dt", cfg.dt);
  cfg.drift_tol = read_number_or(obj, "drift_tol", "integrator.drift_tol", cfg.drift_tol);
  cfg.fd_step = read_number_or(obj, "fd_step", "integrator.fd_step", cfg.fd_step);
  if (!(cfg.dt > 0.0))
  {
    throw SchemaError("integrator.dt", "must be positive");
  }
  if (!(cfg.drift_tol > 0.0))
  {
    throw SchemaError("integrator.drift_tol", "must be positive");
  }
  if (!(cfg.fd_step > 0.0))
  {
    throw SchemaError("integrator.fd_step", "must be positive");
  }
  return cfg;
}

std::size_t read_count(const json& obj, const std::string& key, const std::string& path, std::size_t fallback)
{
  if (!obj.contains(key))
  {
    return fallback;
  }
  const json& value = obj.at(key);
  if (!value.is_number_integer() || value.get<long long>() <= 0)
  {
    throw SchemaError(path, "must be a positive integer");
  }
  return static_cast<std::size_t>(value.get<long long>());
}

SimulationSettings read_tolerances(const json& obj)
{
  check_keys(obj, "tolerances",
             {"event_tol", "graze_tol", "max_events", "min_flight_time", "max_bisections", "rank_tol",
              "nesting_tol", "admissibility_tol"});
  SimulationSettings s;
  auto positive = [&](const char* key, double fallback) {
    const std::string path = std::string("tolerances.") + key;
    const double value = read_number_or(obj, key, path, fallback);
    if (!(value > 0.0))
    {
      throw SchemaError(path, "must be positive");
    }
    return value;
  };
  s.event_tol = positive("event_tol", s.event_tol);
  s.graze_tol = positive("graze_tol", s.graze_tol);
  s.min_flight_time = positive("min_flight_time", s.min_flight_time);
  s.rank_tol = positive("rank_tol", s.rank_tol);
  if (!(s.rank_tol < 1.0))
  {
    throw SchemaError("tolerances.rank_tol", "must be below 1");
  }
  s.nesting_tol = positive("nesting_tol", s.nesting_tol);
  s.admissibility_tol = positive("admissibility_tol", s.admissibility_tol);
  s.max_events = read_count(obj, "max_events", "tolerances.max_events", s.max_events);
  s.max_bisections = read_count(obj, "max_bisections", "tolerances.max_bisections", s.max_bisections);
  return s;
}

void check_wall_initial_state(const BallParams& p, const BallState& s, double tol)
{
  const double r = p.radius_r;
  if (std::abs(s.position_S(2) - r) > tol * std::max(1.0, r))
  {
    throw SchemaError("initial_state.position_S", "z_S must equal the radius for a ball rolling on the floor");
  }
  if (s.v_S(2) != 0.0)
  {
    throw SchemaError("initial_state.v_S", "vertical velocity must be 0 for a ball rolling on the floor");
  }
  Eigen::Matrix<double, 5, 1> v;
  v << s.v_S(0), s.v_S(1), s.omega;
  const double violation = max_abs(ball_wall_rolling_constraint(p) * v);
  if (violation > tol * (1.0 + max_abs(v)))
  {
    throw SchemaError("initial_state.omega", "violates rolling: need omega_x = -v_y / r, omega_y = v_x / r");
  }
}

// ===== JSON writing =====

json vector_json(const Eigen::VectorXd& v)
{
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
  {
    out.push_back(v(i));
  }
  return out;
}

json matrix_json(const Eigen::MatrixXd& m)
{
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
  {
    out.push_back(vector_json(m.row(i).transpose()));
  }
  return out;
}

json ball_params_json(const BallParams& p)
{
  return {{"mass", p.mass}, {"inertia_J", p.inertia_J}, {"radius_r", p.radius_r}, {"gravity_g", p.gravity_g}};
}

json ball_state_json(const BallState& s)
{
  const auto& q = s.orientation;
  return {{"position_S", vector_json(s.position_S)},
          {"orientation", json::array({q.w(), q.x(), q.y(), q.z()})},
          {"v_S", vector_json(s.v_S)},
          {"omega", vector_json(s.omega)}};
}

// ===== Equality =====

bool same(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool same(const BallState& a, const BallState& b)
{
  return a.position_S == b.position_S && a.orientation.coeffs() == b.orientation.coeffs() && a.v_S == b.v_S &&
         a.omega == b.omega;
}

bool same(const PlanarPotential& a, const PlanarPotential& b)
{
  return a.linear == b.linear && a.stiffness == b.stiffness && a.center == b.center;
}

bool same(const GenericSystemSpec& a, const GenericSystemSpec& b)
{
  if (a.dimension != b.dimension || a.metric_slopes.size() != b.metric_slopes.size())
  {
    return false;
  }
  for (std::size_t k = 0; k < a.metric_slopes.size(); ++k)
  {
    if (!same(a.metric_slopes[k], b.metric_slopes[k]))
    {
      return false;
    }
  }
  if (a.wall_point.has_value() != b.wall_point.has_value() ||
      (a.wall_point && !same(*a.wall_point, *b.wall_point)))
  {
    return false;
  }
  return same(a.metric, b.metric) && same(a.potential_linear, b.potential_linear) &&
         same(a.potential_stiffness, b.potential_stiffness) && same(a.constraint_A, b.constraint_A) &&
         same(a.constraint_B, b.constraint_B) && a.guard_offset == b.guard_offset &&
         same(a.guard_normal, b.guard_normal);
}

}  // namespace

std::string_view to_string(SceneKind kind)
{
  switch (kind)
  {
    case SceneKind::BallFloor:
      return "ball_floor";
    case SceneKind::BallWall:
      return "ball_wall";
    case SceneKind::Generic:
      return "generic";
  }
  return "unknown";
}

SceneKind SceneConfig::kind() const
{
  return static_cast<SceneKind>(scene.index());
}

SimulationSettings SceneConfig::simulation() const
{
  SimulationSettings s = tolerances;
  s.mu = mu;
  return s;
}

bool operator==(const SceneConfig& a, const SceneConfig& b)
{
  if (a.scene.index() != b.scene.index() || a.mu != b.mu || a.t_max != b.t_max ||
      !(a.integrator == b.integrator) || !(a.simulation() == b.simulation()))
  {
    return false;
  }
  if (const auto* fa = std::get_if<BallFloorScene>(&a.scene))
  {
    const auto& fb = std::get<BallFloorScene>(b.scene);
    return fa->params == fb.params && same(fa->initial, fb.initial);
  }
  if (const auto* wa = std::get_if<BallWallScene>(&a.scene))
  {
    const auto& wb = std::get<BallWallScene>(b.scene);
    return wa->params == wb.params && same(wa->potential, wb.potential) && same(wa->initial, wb.initial);
  }
  const auto& ga = std::get<GenericScene>(a.scene);
  const auto& gb = std::get<GenericScene>(b.scene);
  return same(ga.spec, gb.spec) && same(ga.x0, gb.x0) && same(ga.v0, gb.v0);
}

SceneConfig parse_scene_text(const std::string& text)
{
  json doc;
  try
  {
    doc = json::parse(text);
  }
  catch (const json::parse_error& e)
  {
    throw SchemaError("<document>", e.what());
  }
  if (!doc.is_object())
  {
    throw SchemaError("<document>", "must be a JSON object");
  }
  check_keys(doc, "", {"scene_kind", "params", "initial_state", "mu", "integrator", "t_max", "tolerances"});

  if (!doc.contains("scene_kind") || !doc.at("scene_kind").is_string())
  {
    throw SchemaError("scene_kind", "must be one of ball_floor, ball_wall, generic");
  }
  const std::string kind = doc.at("scene_kind").get<std::string>();

  SceneConfig cfg;
  cfg.mu = read_number(doc, "mu", "mu");
  if (!(cfg.mu >= 0.0 && cfg.mu <= 1.0))
  {
    throw SchemaError("mu", "restitution coefficient must lie in [0, 1]");
  }
  cfg.t_max = read_number(doc, "t_max", "t_max");
  if (cfg.t_max < 0.0)
  {
    throw SchemaError("t_max", "must be >= 0");
  }
  if (doc.contains("integrator"))
  {
    cfg.integrator = read_integrator(require_object(doc, "integrator", "integrator"));
  }
  if (doc.contains("tolerances"))
  {
    cfg.tolerances = read_tolerances(require_object(doc, "tolerances", "tolerances"));
  }

  const json& params = require_object(doc, "params", "params");
  const json& state = require_object(doc, "initial_state", "initial_state");
  if (kind == "ball_floor")
  {
    BallFloorScene scene;
    scene.params = read_ball_params(params, false);
    scene.initial = read_ball_state(state);
    cfg.scene = scene;
  }
  else if (kind == "ball_wall")
  {
    BallWallScene scene;
    scene.params = read_ball_params(params, true);
    if (params.contains("potential"))
    {
      scene.potential = read_planar_potential(require_object(params, "potential", "params.potential"));
    }
    scene.initial = read_ball_state(state);
    check_wall_initial_state(scene.params, scene.initial, cfg.tolerances.admissibility_tol);
    cfg.scene = scene;
  }
  else if (kind == "generic")
  {
    GenericScene scene;
    scene.spec = read_generic_spec(params);
    check_keys(state, "initial_state", {"x", "v"});
    scene.x0 = read_vector_key(state, "x", "initial_state.x", scene.spec.dimension);
    scene.v0 = read_vector_key(state, "v", "initial_state.v", scene.spec.dimension);
    cfg.scene = scene;
  }
  else
  {
    throw SchemaError("scene_kind", "unknown scene kind \"" + kind + "\"");
  }
  return cfg;
}

SceneConfig parse_scene(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw Error(ErrorKind::IoError, "cannot open scene file " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scene_text(buffer.str());
}

std::string emit_scene(const SceneConfig& config)
{
  json doc;
  doc["scene_kind"] = std::string(to_string(config.kind()));
  doc["mu"] = config.mu;
  doc["t_max"] = config.t_max;
  doc["integrator"] = {{"dt", config.integrator.dt},
                       {"drift_tol", config.integrator.drift_tol},
                       {"fd_step", config.integrator.fd_step}};
  const SimulationSettings& tol = config.tolerances;
  doc["tolerances"] = {{"event_tol", tol.event_tol},
                       {"graze_tol", tol.graze_tol},
                       {"max_events", tol.max_events},
                       {"min_flight_time", tol.min_flight_time},
                       {"max_bisections", tol.max_bisections},
                       {"rank_tol", tol.rank_tol},
                       {"nesting_tol", tol.nesting_tol},
                       {"admissibility_tol", tol.admissibility_tol}};

  if (const auto* floor = std::get_if<BallFloorScene>(&config.scene))
  {
    doc["params"] = ball_params_json(floor->params);
    doc["initial_state"] = ball_state_json(floor->initial);
  }
  else if (const auto* wall = std::get_if<BallWallScene>(&config.scene))
  {
    json params = ball_params_json(wall->params);
    params["potential"] = {{"linear", vector_json(wall->potential.linear)},
                           {"stiffness", matrix_json(wall->potential.stiffness)},
                           {"center", vector_json(wall->potential.center)}};
    doc["params"] = params;
    doc["initial_state"] = ball_state_json(wall->initial);
  }
  else
  {
    const auto& generic = std::get<GenericScene>(config.scene);
    const GenericSystemSpec& spec = generic.spec;
    json params;
    params["dimension"] = spec.dimension;
    params["metric"] = matrix_json(spec.metric);
    if (!spec.metric_slopes.empty())
    {
      json slopes = json::array();
      for (const auto& s : spec.metric_slopes)
      {
        slopes.push_back(matrix_json(s));
      }
      params["metric_slopes"] = slopes;
    }
    params["potential"] = {{"linear", vector_json(spec.potential_linear)},
                           {"stiffness", matrix_json(spec.potential_stiffness)}};
    params["constraint_A"] = matrix_json(spec.constraint_A);
    params["constraint_B"] = matrix_json(spec.constraint_B);
    if (spec.guard_normal.size() > 0)
    {
      params["guard"] = {{"offset", spec.guard_offset}, {"normal", vector_json(spec.guard_normal)}};
    }
    if (spec.wall_point)
    {
      params["wall_point"] = vector_json(*spec.wall_point);
    }
    doc["params"] = params;
    doc["initial_state"] = {{"x", vector_json(generic.x0)}, {"v", vector_json(generic.v0)}};
  }
  return doc.dump(2) + "\n";
}

MechanicalSystem build_system(const SceneConfig& config)
{
  if (const auto* floor = std::get_if<BallFloorScene>(&config.scene))
  {
    return build_ball_floor_scene(floor->params);
  }
  if (const auto* wall = std::get_if<BallWallScene>(&config.scene))
  {
    return build_ball_wall_scene(wall->params, wall->potential);
  }
  const auto& generic = std::get<GenericScene>(config.scene);
  return generic_system_from_config(generic.spec, config.tolerances.rank_tol, config.tolerances.nesting_tol);
}

FlowState initial_flow_state(const SceneConfig& config)
{
  if (const auto* floor = std::get_if<BallFloorScene>(&config.scene))
  {
    Vector v(6);
    v << floor->initial.v_S, floor->initial.omega;
    return {0.0, ball_config(floor->initial), v};
  }
  if (const auto* wall = std::get_if<BallWallScene>(&config.scene))
  {
    Vector v(5);
    v << wall->initial.v_S(0), wall->initial.v_S(1), wall->initial.omega;
    return {0.0, ball_config(wall->initial), v};
  }
  const auto& generic = std::get<GenericScene>(config.scene);
  return {0.0, generic.x0, generic.v0};
}

// ===== Matrix text =====

Eigen::MatrixXd parse_matrix_text(const std::string& text)
{
  std::vector<std::vector<double>> rows;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line))
  {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos)
    {
      line.erase(hash);
    }
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end)
    {
      while (p < end && std::isspace(static_cast<unsigned char>(*p)))
      {
        ++p;
      }
      if (p == end)
      {
        break;
      }
      if (*p == '+')
      {
        ++p;
      }
      double value = 0.0;
      const auto [next, ec] = std::from_chars(p, end, value);
      if (ec != std::errc() || (next < end && !std::isspace(static_cast<unsigned char>(*next))))
      {
        throw SchemaError("line " + std::to_string(line_no), "not a number");
      }
      row.push_back(value);
      p = next;
    }
    if (row.empty())
    {
      continue;
    }
    if (!rows.empty() && row.size() != rows.front().size())
    {
      throw SchemaError("line " + std::to_string(line_no), "row length differs from the first row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty())
  {
    return Eigen::MatrixXd(0, 0);
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
  {
    for (std::size_t j = 0; j < rows[i].size(); ++j)
    {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

Eigen::MatrixXd read_matrix_file(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw Error(ErrorKind::IoError, "cannot open matrix file " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  try
  {
    return parse_matrix_text(buffer.str());
  }
  catch (const SchemaError& e)
  {
    throw SchemaError(path.string() + ":" + e.field(), "not a numeric table");
  }
}

std::string format_double(double value)
{
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, 17);
  return std::string(buf.data(), ec == std::errc() ? end : buf.data());
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m)
{
  for (Eigen::Index i = 0; i < m.rows(); ++i)
  {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
    {
      os << (j ? " " : "") << format_double(m(i, j));
    }
    os << '\n';
  }
}

// ===== Tables =====

void write_trajectory_csv(std::ostream& os, const MechanicalSystem& sys, const Trajectory& traj)
{
  const bool ball = sys.ball.has_value();
  if (ball)
  {
    os << "t,x_S,y_S,z_S,q_w,q_x,q_y,q_z,v_x,v_y,v_z,w_x,w_y,w_z,energy\n";
  }
  else
  {
    os << "t";
    for (const auto& label : sys.config_labels)
    {
      os << ',' << label;
    }
    for (const auto& label : sys.velocity_labels)
    {
      os << ',' << label;
    }
    os << ",energy\n";
  }

  for (const auto& s : traj.samples)
  {
    os << format_double(s.t);
    if (ball)
    {
      const BallState b = ball_state_from(sys, s.x, s.v);
      const auto& q = b.orientation;
      for (double value : {b.position_S(0), b.position_S(1), b.position_S(2), q.w(), q.x(), q.y(), q.z(), b.v_S(0),
                           b.v_S(1), b.v_S(2), b.omega(0), b.omega(1), b.omega(2)})
      {
        os << ',' << format_double(value);
      }
    }
    else
    {
      for (Eigen::Index i = 0; i < s.x.size(); ++i)
      {
        os << ',' << format_double(s.x(i));
      }
      for (Eigen::Index i = 0; i < s.v.size(); ++i)
      {
        os << ',' << format_double(s.v(i));
      }
    }
    os << ',' << format_double(energy(sys, s)) << '\n';
  }
}

void write_events_csv(std::ostream& os, const MechanicalSystem& sys, const Trajectory& traj)
{
  os << "tau";
  for (const char* prefix : {"pre_", "post_"})
  {
    for (const auto& label : sys.velocity_labels)
    {
      os << ',' << prefix << label;
    }
  }
  os << ",T_minus,T_plus,guard_rate,mu\n";

  for (const auto& ev : traj.events)
  {
    os << format_double(ev.tau);
    for (const Vector* v : {&ev.v_minus, &ev.v_plus})
    {
      for (Eigen::Index i = 0; i < v->size(); ++i)
      {
        os << ',' << format_double((*v)(i));
      }
    }
    os << ',' << format_double(ev.T_minus) << ',' << format_double(ev.T_plus) << ','
       << format_double(ev.guard_rate) << ',' << format_double(ev.mu) << '\n';
  }
}

}  // namespace nhimpact
