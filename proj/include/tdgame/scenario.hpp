#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tdgame/types.hpp"

namespace tdgame {

enum class Method { newton, newton_kantorovich };
enum class Algorithm { potential, best_response };
enum class SweepOrder { gauss_seidel, jacobi };
enum class Padding { duplicate_last, zero };
/// How the self cost measures speed: Euclidean norm of the velocity, or the
/// velocity error against v_ref along the vehicle's lane heading.
enum class SpeedModel { lane, euclidean };

std::string to_string(Method m);
std::string to_string(Algorithm a);
std::string to_string(SweepOrder o);
std::string to_string(Padding p);
std::string to_string(SpeedModel m);
Method parse_method(const std::string& s);
Algorithm parse_algorithm(const std::string& s);

struct SolverSettings {
  Method method = Method::newton;
  Algorithm algorithm = Algorithm::potential;
  int k_iters = 3;
  double mu = 1e-6;
  double eps_br = 1e-8;
  int max_br_sweeps = 50;
  double converge_tol = 1e-8;
  int max_converge_iters = 200;
  SweepOrder br_order = SweepOrder::gauss_seidel;
};

struct OracleSettings {
  int n_starts = 16;
  std::uint64_t seed = 1;
  double converge_tol = 1e-11;
  int max_iters = 200;
};

struct ScenarioConfig {
  int n_vehicles = 0;
  double dt = 0.25;
  int horizon_T = 10;
  int sim_steps = 40;
  double alpha = 1.0;
  double beta = 1.0;
  double delta = 0.01;
  double u_max = 4.0;
  std::vector<double> v_ref;
  std::vector<State> initial_states;
  SpeedModel speed_model = SpeedModel::lane;
  /// Lane heading angles in radians; empty means the initial velocity directions.
  std::vector<double> headings;
  double safety_floor = 1.0;
  Padding padding = Padding::duplicate_last;
  SolverSettings solver;
  OracleSettings oracle;

  /// Throws DomainError naming the offending field path.
  void validate() const;

  /// Unit lane direction of every vehicle.
  std::vector<Eigen::Vector2d> lane_directions() const;
};

/// Violations as "field.path: message" strings; empty when valid.
std::vector<std::string> validation_errors(const ScenarioConfig& cfg);

/// Canonical 5-vehicle intersection.
ScenarioConfig default_scenario();

ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioConfig& cfg);

ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Applies a dotted-path override such as "solver.k_iters=5" or "beta=3".
/// Unknown keys throw DomainError.
void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace tdgame
