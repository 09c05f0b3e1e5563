#pragma once

// Receding-horizon loop: shift the previous solution, run K iterations on the
// current game, apply every vehicle's first control, advance the plant.

#include <functional>
#include <optional>
#include <vector>

#include "tdgame/scenario.hpp"
#include "tdgame/solvers.hpp"

namespace tdgame {

struct ClosedLoopRecord {
  /// states[t][i] for t = 0..T_sim.
  std::vector<std::vector<State>> states;
  /// applied_inputs[t][i] for t = 0..T_sim-1.
  std::vector<std::vector<Input>> applied_inputs;
  /// Solver starting point at each instant (oracle solution at t = 0).
  std::vector<Profile> warmstarts;
  /// Final iterate u^(K)(t) at each instant.
  std::vector<Profile> profiles;
  std::vector<IterationTrace> traces;
  /// Solver seconds per instant; excludes the t = 0 oracle initialization.
  std::vector<double> wall_times;
};

class ClosedLoopError : public std::runtime_error {
 public:
  ClosedLoopError(const std::string& what, ClosedLoopRecord partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const ClosedLoopRecord& partial() const { return partial_; }

 private:
  ClosedLoopRecord partial_;
};

/// Drops each vehicle's first control, shifts the rest forward and pads the last slot.
Profile shift_warmstart(const Profile& prev, Padding padding = Padding::duplicate_last);

/// One K-iteration solve of the game at x0_all from the given warmstart.
struct InstantResult {
  Profile profile;
  IterationTrace trace;
};

InstantResult solve_instant(const CostModel<double>& model, const std::vector<State>& x0_all,
                            const Profile& warmstart, const SolverSettings& settings,
                            SolveMode mode, double u_max);

/// Produces the t = 0 initialization. The default uses the oracle.
using Initializer = std::function<Profile(const std::vector<State>& x0_all)>;

ClosedLoopRecord run_closed_loop(const ScenarioConfig& cfg, const SolverSettings& settings,
                                 const Initializer& initializer = {});

/// Minimum over vehicle pairs of the distance between their positions.
double min_pairwise_distance(const std::vector<State>& states);

}  // namespace tdgame
