#include "tdgame/controller.hpp"

#include <chrono>
#include <limits>

#include "tdgame/oracle.hpp"

namespace tdgame {

Profile shift_warmstart(const Profile& prev, Padding padding) {
  Profile out(prev.n_vehicles(), prev.horizon());
  const std::size_t horizon = prev.horizon();
  for (std::size_t i = 0; i < prev.n_vehicles(); ++i) {
    for (std::size_t tau = 0; tau + 1 < horizon; ++tau) out.input(i, tau) = prev.input(i, tau + 1);
    if (horizon == 0) continue;
    if (padding == Padding::duplicate_last) {
      out.input(i, horizon - 1) = prev.input(i, horizon - 1);
    } else {
      out.input(i, horizon - 1).setZero();
    }
  }
  return out;
}

InstantResult solve_instant(const CostModel<double>& model, const std::vector<State>& x0_all,
                            const Profile& warmstart, const SolverSettings& settings,
                            SolveMode mode, double u_max) {
  if (settings.algorithm == Algorithm::potential) {
    auto r = solve_potential(model, x0_all, warmstart, settings, mode, u_max);
    return {std::move(r.profile), std::move(r.trace)};
  }
  auto r = best_response_sweep(model, x0_all, warmstart, settings, mode, u_max);
  return {std::move(r.profile), std::move(r.trace)};
}

ClosedLoopRecord run_closed_loop(const ScenarioConfig& cfg, const SolverSettings& settings,
                                 const Initializer& initializer) {
  cfg.validate();
  const CostModel<double> model(cfg);
  const auto n = static_cast<std::size_t>(cfg.n_vehicles);
  const auto horizon = static_cast<std::size_t>(cfg.horizon_T);

  ClosedLoopRecord rec;
  rec.states.push_back(cfg.initial_states);

  for (int t = 0; t < cfg.sim_steps; ++t) {
    const std::vector<State>& x = rec.states.back();
    Profile warm;
    if (t == 0) {
      warm = initializer ? initializer(x)
                         : oracle_solve(model, x, cfg, settings.algorithm, cfg.oracle, std::nullopt)
                               .profile;
      if (warm.n_vehicles() != n || warm.horizon() != horizon) {
        throw ClosedLoopError("initializer returned a profile of the wrong shape", rec);
      }
    } else {
      warm = shift_warmstart(rec.profiles.back(), cfg.padding);
    }
    rec.warmstarts.push_back(warm);

    InstantResult result;
    const auto start = std::chrono::steady_clock::now();
    try {
      result = solve_instant(model, x, warm, settings, SolveMode::time_distributed, cfg.u_max);
    } catch (const SolverError& e) {
      throw ClosedLoopError("instant " + std::to_string(t) + ": " + e.what(), rec);
    }
    const auto stop = std::chrono::steady_clock::now();
    rec.wall_times.push_back(std::chrono::duration<double>(stop - start).count());

    std::vector<Input> applied(n);
    std::vector<State> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      applied[i] = result.profile.input(i, 0);
      next[i] = step_dynamics<double>(x[i], applied[i], cfg.dt);
    }
    rec.applied_inputs.push_back(std::move(applied));
    rec.profiles.push_back(std::move(result.profile));
    rec.traces.push_back(std::move(result.trace));
    rec.states.push_back(std::move(next));
  }
  return rec;
}

double min_pairwise_distance(const std::vector<State>& states) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      best = std::min(best, (states[i].head<2>() - states[j].head<2>()).norm());
    }
  }
  return best;
}

}  // namespace tdgame
