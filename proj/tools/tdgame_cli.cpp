// tdgame: closed-loop simulations and experiment sweeps for time-distributed
// equilibrium seeking.
//
//   tdgame validate <config>
//   tdgame simulate <config> [--set key=value ...] [--out dir]
//   tdgame experiment <plan> [--out dir]
//
// TDGAME_OUTPUT_DIR, when set, overrides the output directory of simulate and
// experiment unless --out is given.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tdgame/bench.hpp"

namespace {

using tdgame::DomainError;
using nlohmann::json;

std::filesystem::path output_dir(const std::string& flag, const std::filesystem::path& fallback) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("TDGAME_OUTPUT_DIR"); env && *env) return env;
  return fallback;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DomainError(path + ": parse error: " + e.what());
  }
}

int cmd_validate(const std::string& config_path) {
  const tdgame::ScenarioConfig cfg = tdgame::scenario_from_json(read_json(config_path));
  const auto errors = tdgame::validation_errors(cfg);
  if (!errors.empty()) {
    for (const auto& e : errors) std::cerr << "invalid: " << e << '\n';
    return 1;
  }
  std::cout << tdgame::to_json(cfg).dump(2) << '\n';
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::vector<std::string>& overrides,
                 const std::string& out_flag) {
  json doc = tdgame::to_json(tdgame::scenario_from_json(read_json(config_path)));
  for (const auto& o : overrides) tdgame::apply_override(doc, o);
  const tdgame::ScenarioConfig cfg = tdgame::scenario_from_json(doc);
  cfg.validate();

  const auto dir = output_dir(out_flag, "simulation");
  try {
    const auto record = tdgame::run_closed_loop(cfg, cfg.solver);
    tdgame::write_simulation_outputs(dir, cfg, record);
  } catch (const tdgame::ClosedLoopError& e) {
    tdgame::write_simulation_outputs(dir, cfg, e.partial());
    std::cerr << "solver failure: " << e.what() << '\n';
    return 3;
  }
  std::cout << "wrote " << dir.string() << '\n';
  return 0;
}

int cmd_experiment(const std::string& plan_path, const std::string& out_flag) {
  tdgame::ExperimentPlan plan = tdgame::load_plan(plan_path);
  plan.output_dir = output_dir(out_flag, plan.output_dir);
  plan.validate();
  const auto result = tdgame::run_experiment(plan);
  tdgame::write_experiment_outputs(plan, result);
  for (const auto& c : result.cells) {
    std::cout << tdgame::to_string(c.algorithm) << ' ' << tdgame::to_string(c.method) << " K=" << c.k
              << ": ";
    if (c.ok) {
      std::cout << "mean " << c.report.mean_error << " max " << c.report.max_error << " median "
                << c.report.solver_time.median << " s (oracle " << c.report.oracle_time.median
                << " s)\n";
    } else {
      std::cout << "FAILED: " << c.error << '\n';
    }
  }
  std::cout << "wrote " << plan.output_dir.string() << '\n';
  return result.all_ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-distributed Newton / Newton-Kantorovich equilibrium seeking"};
  app.require_subcommand(1);

  std::string config_path;
  std::string plan_path;
  std::string out_dir;
  std::vector<std::string> overrides;

  auto* validate = app.add_subcommand("validate", "Check a scenario config and echo it normalized");
  validate->add_option("config", config_path, "Scenario config (JSON)")->required();

  auto* simulate = app.add_subcommand("simulate", "Run one time-distributed closed loop");
  simulate->add_option("config", config_path, "Scenario config (JSON)")->required();
  simulate->add_option("--set", overrides, "Override a field, e.g. --set solver.K=5");
  simulate->add_option("--out", out_dir, "Output directory");

  auto* experiment = app.add_subcommand("experiment", "Run an experiment plan against the oracle");
  experiment->add_option("plan", plan_path, "Experiment plan (JSON)")->required();
  experiment->add_option("--out", out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return cmd_validate(config_path);
    if (simulate->parsed()) return cmd_simulate(config_path, overrides, out_dir);
    if (experiment->parsed()) return cmd_experiment(plan_path, out_dir);
  } catch (const DomainError& e) {
    std::cerr << "invalid: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
