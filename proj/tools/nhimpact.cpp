// Command-line front end: simulate a scene, print an impact map, or run the
// invariant suite on a scene file.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>

#include "nhimpact/commands.hpp"

int main(int argc, char** argv)
{
  CLI::App app{"Impacts of nonholonomic systems with rough walls"};
  app.require_subcommand(1);

  nhimpact::SimulateOptions sim;
  double t_max = 0.0;
  double dt = 0.0;
  auto* simulate = app.add_subcommand("simulate", "Run a scene and write trajectory and event tables");
  simulate->add_option("--scene", sim.scene, "Scene file (JSON)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", sim.out, "Trajectory CSV output")->required();
  simulate->add_option("--events", sim.events, "Events CSV output")->required();
  auto* t_max_opt = simulate->add_option("--t-max", t_max, "Override the scene's t_max [s]");
  auto* dt_opt = simulate->add_option("--dt", dt, "Override the integrator step [s]");

  nhimpact::ImpactMapOptions map;
  std::string constraint_a;
  auto* impact = app.add_subcommand("impact-map", "Print P and R = I - (1 + mu) P for given G, A, B");
  impact->add_option("--metric", map.metric, "Metric G (text table)")->required()->check(CLI::ExistingFile);
  auto* a_opt = impact->add_option("--constraint-a", constraint_a, "Constraint A (text table)")
                    ->check(CLI::ExistingFile);
  impact->add_option("--constraint-b", map.constraint_b, "Wall constraint B (text table)")
      ->required()
      ->check(CLI::ExistingFile);
  impact->add_option("--mu", map.mu, "Restitution coefficient in [0, 1]")->required();

  std::string scene;
  auto* validate = app.add_subcommand("validate", "Run the invariant suite on a scene");
  validate->add_option("--scene", scene, "Scene file (JSON)")->required()->check(CLI::ExistingFile);

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e)
  {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (simulate->parsed())
  {
    if (*t_max_opt)
    {
      sim.t_max = t_max;
    }
    if (*dt_opt)
    {
      sim.dt = dt;
    }
    return nhimpact::cmd_simulate(sim, std::cout, std::cerr);
  }
  if (impact->parsed())
  {
    if (*a_opt)
    {
      map.constraint_a = constraint_a;
    }
    return nhimpact::cmd_impact_map(map, std::cout, std::cerr);
  }
  return nhimpact::cmd_validate(scene, std::cout, std::cerr);
}
