#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nhimpact/scene_io.hpp"

namespace nhimpact
{

struct SimulateOptions
{
  std::filesystem::path scene;
  std::filesystem::path out;
  std::filesystem::path events;
  std::optional<double> t_max;
  std::optional<double> dt;
};

struct ImpactMapOptions
{
  std::filesystem::path metric;
  std::optional<std::filesystem::path> constraint_a;  // absent, empty, or all-zero: no constraint
  std::filesystem::path constraint_b;
  double mu = 1.0;
};

struct CheckResult
{
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
};

// Invariant suite for a scene: metric, constraint ranks, nesting, projector
// algebra, impact-map properties at the scene's mu, and for the built-in
// ball scenes agreement with the closed-form impact laws.
std::vector<CheckResult> run_invariant_suite(const SceneConfig& config, unsigned seed = 12345);

// Each command returns the process exit status: 0 success, 2 schema or
// validation failure, 3 numerical failure.
int cmd_simulate(const SimulateOptions& opts, std::ostream& out, std::ostream& err);
int cmd_impact_map(const ImpactMapOptions& opts, std::ostream& out, std::ostream& err);
int cmd_validate(const std::filesystem::path& scene, std::ostream& out, std::ostream& err);

}  // namespace nhimpact
