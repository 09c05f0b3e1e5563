#pragma once

// Experiment driver behind the command-line tool: single closed-loop
// simulations, (algorithm x method x K) sweeps against the oracle, and the
// CSV / JSON artifacts they produce.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tdgame/controller.hpp"
#include "tdgame/oracle.hpp"

namespace tdgame {

struct ExperimentPlan {
  ScenarioConfig scenario;
  std::vector<Method> methods;
  std::vector<Algorithm> algorithms;
  std::vector<int> k_values;
  int repetitions = 1;
  int workers = 1;
  std::filesystem::path output_dir = "results";

  /// Throws DomainError naming the offending field.
  void validate() const;
};

/// Relative "scenario" paths resolve against the plan file's directory. The
/// scenario may also be given inline as an object.
ExperimentPlan load_plan(const std::filesystem::path& path);
ExperimentPlan plan_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

struct CellResult {
  Algorithm algorithm = Algorithm::potential;
  Method method = Method::newton;
  int k = 0;
  ClosedLoopRecord record;
  std::vector<Profile> oracle_profiles;
  /// Oracle seconds per instant.
  std::vector<double> oracle_times;
  /// Per-instant median over the timing repetitions.
  std::vector<double> median_solver_times;
  ErrorReport report;
  bool ok = false;
  std::string error;
};

/// Time-distributed closed loop for one (algorithm, method, K), followed by the
/// oracle on every game along its state trajectory. `initial` is the t = 0
/// oracle profile shared by all cells of the same algorithm.
CellResult run_cell(const ScenarioConfig& scenario, Algorithm algorithm, Method method, int k,
                    int repetitions, const Profile& initial);

struct ExperimentResult {
  std::vector<CellResult> cells;
  bool all_ok = true;
};

ExperimentResult run_experiment(const ExperimentPlan& plan);

/// Fixed-format decimal text with 17 significant digits.
std::string format_number(double v);

std::string error_csv_name(Algorithm a, Method m, int k);

void write_error_csv(const std::filesystem::path& path, const CellResult& cell);
void write_experiment_outputs(const ExperimentPlan& plan, const ExperimentResult& result);
nlohmann::json summary_json(const ExperimentPlan& plan, const ExperimentResult& result);

/// trajectory.csv, profile_trace.json, timing.csv and effective_config.json.
void write_simulation_outputs(const std::filesystem::path& dir, const ScenarioConfig& cfg,
                              const ClosedLoopRecord& record);

/// Parses the per-instant errors back out of an errors_*.csv file.
std::vector<double> read_error_column(const std::filesystem::path& path);

}  // namespace tdgame
