#pragma once

// Fully-converged reference solutions and the approximation-error statistics
// computed against them.

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tdgame/scenario.hpp"
#include "tdgame/solvers.hpp"

namespace tdgame {

struct ClosedLoopRecord;

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OracleResult {
  Profile profile;
  double potential = 0.0;
  /// Index of the winning start; 0 is the warm hint when one was supplied.
  int start_index = 0;
  int converged_starts = 0;
  /// Largest per-vehicle projected-gradient infinity norm at the result.
  double stationarity = 0.0;
};

/// Feasible start drawn uniformly from the per-step input balls.
Profile random_feasible_profile(std::size_t n_vehicles, std::size_t horizon, double u_max,
                                std::mt19937_64& rng);

/// Multi-start converged solve. For the potential algorithm the start with the
/// lowest potential wins (ties within 1e-12 relative go to the lower index).
/// For best response, converged sweeps are run from that winner.
OracleResult oracle_solve(const CostModel<double>& model, const std::vector<State>& x0_all,
                          const ScenarioConfig& cfg, Algorithm algorithm,
                          const OracleSettings& settings, const std::optional<Profile>& warm_hint);

OracleResult oracle_solve(const std::vector<State>& x0_all, const ScenarioConfig& cfg,
                          Algorithm algorithm, const OracleSettings& settings,
                          const std::optional<Profile>& warm_hint = std::nullopt);

/// Largest over vehicles of the projected-gradient infinity norm of V_i in u_i.
double vehicle_stationarity(const CostModel<double>& model, const std::vector<State>& x0_all,
                            const Profile& profile, double u_max);

/// Largest decrease of any vehicle's own cost over `samples` random feasible
/// unilateral deviations per vehicle. Non-positive at a Nash equilibrium.
double max_unilateral_improvement(const CostModel<double>& model, const std::vector<State>& x0_all,
                                  const Profile& profile, double u_max, int samples,
                                  std::uint64_t seed);

/// Euclidean norm of the flattened difference.
double compute_error(const Profile& u_td, const Profile& u_oracle);

struct TimingSummary {
  double mean = 0.0;
  double median = 0.0;
  double total = 0.0;
};

TimingSummary summarize_times(const std::vector<double>& seconds);

struct ErrorReport {
  std::string algorithm;
  std::string method;
  int k = 0;
  /// e(t) for t = 1..T_sim-1, stored at index t-1.
  std::vector<double> per_instant;
  double mean_error = 0.0;
  double max_error = 0.0;
  TimingSummary solver_time;
  TimingSummary oracle_time;
};

/// Errors of the recorded per-instant profiles against oracle profiles aligned
/// with them (one per instant, index t).
ErrorReport build_error_report(const ClosedLoopRecord& record,
                               const std::vector<Profile>& oracle_profiles,
                               const ScenarioConfig& cfg);

}  // namespace tdgame
