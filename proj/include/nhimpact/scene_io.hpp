#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>

#include "nhimpact/constrained_dynamics.hpp"
#include "nhimpact/hybrid_simulator.hpp"
#include "nhimpact/mechanical_models.hpp"

namespace nhimpact
{

enum class SceneKind
{
  BallFloor,
  BallWall,
  Generic,
};

std::string_view to_string(SceneKind kind);

struct BallFloorScene
{
  BallParams params;
  BallState initial;
};

struct BallWallScene
{
  BallParams params;
  PlanarPotential potential;
  BallState initial;
};

struct GenericScene
{
  GenericSystemSpec spec;
  Vector x0;
  Vector v0;
};

/// Contents of a scene file. Top-level JSON keys: scene_kind, params,
/// initial_state, mu, t_max, and optionally integrator and tolerances.
struct SceneConfig
{
  std::variant<BallFloorScene, BallWallScene, GenericScene> scene;
  double mu = 1.0;
  double t_max = 0.0;
  IntegratorSettings integrator;
  SimulationSettings tolerances;  // its mu is ignored in favour of SceneConfig::mu

  SceneKind kind() const;
  SimulationSettings simulation() const;
};

bool operator==(const SceneConfig& a, const SceneConfig& b);

SceneConfig parse_scene(const std::filesystem::path& path);
SceneConfig parse_scene_text(const std::string& text);
std::string emit_scene(const SceneConfig& config);

MechanicalSystem build_system(const SceneConfig& config);
FlowState initial_flow_state(const SceneConfig& config);

// Whitespace-separated rows, one per line; '#' starts a comment. An empty
// file yields a 0x0 matrix.
Eigen::MatrixXd read_matrix_file(const std::filesystem::path& path);
Eigen::MatrixXd parse_matrix_text(const std::string& text);
void write_matrix(std::ostream& os, const Eigen::MatrixXd& m);

// Shortest locale-independent text with 17 significant digits.
std::string format_double(double value);

void write_trajectory_csv(std::ostream& os, const MechanicalSystem& sys, const Trajectory& traj);
void write_events_csv(std::ostream& os, const MechanicalSystem& sys, const Trajectory& traj);

}  // namespace nhimpact
