#include "tdgame/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "tdgame/controller.hpp"

namespace tdgame {

Profile random_feasible_profile(std::size_t n_vehicles, std::size_t horizon, double u_max,
                                std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Profile p(n_vehicles, horizon);
  for (std::size_t i = 0; i < n_vehicles; ++i) {
    for (std::size_t tau = 0; tau < horizon; ++tau) {
      const double r = u_max * std::sqrt(unit(rng));
      const double theta = 2.0 * std::numbers::pi * unit(rng);
      p.input(i, tau) = Input(r * std::cos(theta), r * std::sin(theta));
    }
  }
  return p;
}

double vehicle_stationarity(const CostModel<double>& model, const std::vector<State>& x0_all,
                            const Profile& profile, double u_max) {
  double worst = 0.0;
  for (std::size_t i = 0; i < profile.n_vehicles(); ++i) {
    const auto b = model.best_response_derivatives(x0_all, profile, i, Order::gradient);
    const VectorXd pg = projected_gradient(profile.sequence(i), b.gradient, u_max);
    worst = std::max(worst, pg.lpNorm<Eigen::Infinity>());
  }
  return worst;
}

OracleResult oracle_solve(const CostModel<double>& model, const std::vector<State>& x0_all,
                          const ScenarioConfig& cfg, Algorithm algorithm,
                          const OracleSettings& settings, const std::optional<Profile>& warm_hint) {
  if (settings.n_starts < 1) throw DomainError("oracle.n_starts must be >= 1");
  const auto n = static_cast<std::size_t>(cfg.n_vehicles);
  const auto horizon = static_cast<std::size_t>(cfg.horizon_T);

  SolverSettings converged = cfg.solver;
  converged.method = Method::newton;
  converged.converge_tol = settings.converge_tol;
  converged.max_converge_iters = settings.max_iters;

  std::vector<Profile> starts;
  if (warm_hint) {
    if (warm_hint->n_vehicles() != n || warm_hint->horizon() != horizon) {
      throw DomainError("oracle_solve: warm hint has the wrong shape");
    }
    starts.push_back(*warm_hint);
  }
  std::mt19937_64 rng(settings.seed);
  for (int s = 0; s < settings.n_starts; ++s) {
    starts.push_back(random_feasible_profile(n, horizon, cfg.u_max, rng));
  }

  OracleResult best;
  bool found = false;
  std::string last_failure;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    PotentialResult r;
    try {
      r = solve_potential(model, x0_all, starts[s], converged, SolveMode::converged, cfg.u_max);
    } catch (const SolverError& e) {
      last_failure = e.what();
      continue;
    }
    const double phi = model.potential(x0_all, r.profile);
    ++best.converged_starts;
    const double tie = 1e-12 * (1.0 + std::abs(best.potential));
    if (!found || phi < best.potential - tie) {
      best.profile = std::move(r.profile);
      best.potential = phi;
      best.start_index = static_cast<int>(s);
      found = true;
    }
  }
  if (!found) {
    throw OracleError("oracle: none of " + std::to_string(starts.size()) +
                      " starts converged; last failure: " + last_failure);
  }

  if (algorithm == Algorithm::best_response) {
    SolverSettings sweeps = converged;
    sweeps.br_order = SweepOrder::gauss_seidel;
    SweepResult r;
    try {
      r = best_response_sweep(model, x0_all, best.profile, sweeps, SolveMode::converged, cfg.u_max);
    } catch (const SolverError& e) {
      throw OracleError(std::string("oracle: best-response sweeps failed: ") + e.what());
    }
    if (!r.converged) {
      throw OracleError("oracle: best-response sweeps did not settle within " +
                        std::to_string(sweeps.max_br_sweeps) + " sweeps");
    }
    best.profile = std::move(r.profile);
    best.potential = model.potential(x0_all, best.profile);
  }

  best.stationarity = vehicle_stationarity(model, x0_all, best.profile, cfg.u_max);
  return best;
}

OracleResult oracle_solve(const std::vector<State>& x0_all, const ScenarioConfig& cfg,
                          Algorithm algorithm, const OracleSettings& settings,
                          const std::optional<Profile>& warm_hint) {
  const CostModel<double> model(cfg);
  return oracle_solve(model, x0_all, cfg, algorithm, settings, warm_hint);
}

double max_unilateral_improvement(const CostModel<double>& model, const std::vector<State>& x0_all,
                                  const Profile& profile, double u_max, int samples,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < profile.n_vehicles(); ++i) {
    const double base = model.individual_cost(x0_all, profile, i);
    for (int s = 0; s < samples; ++s) {
      // Perturbation scales log-uniform between 1e-4 and u_max exercise both
      // the local and the far-field deviations.
      const double scale = u_max * std::pow(10.0, -4.0 * unit(rng));
      Profile deviated = profile;
      const Profile noise = random_feasible_profile(1, profile.horizon(), 1.0, rng);
      deviated.sequence(i) = project_flat<double>(
          VectorXd(profile.sequence(i)) + scale * noise.flat(), u_max);
      worst = std::max(worst, base - model.individual_cost(x0_all, deviated, i));
    }
  }
  return worst;
}

double compute_error(const Profile& u_td, const Profile& u_oracle) {
  if (u_td.n_vehicles() != u_oracle.n_vehicles() || u_td.horizon() != u_oracle.horizon()) {
    throw DomainError("compute_error: profiles have different dimensions");
  }
  return (u_td.flat() - u_oracle.flat()).norm();
}

TimingSummary summarize_times(const std::vector<double>& seconds) {
  TimingSummary s;
  if (seconds.empty()) return s;
  s.total = std::accumulate(seconds.begin(), seconds.end(), 0.0);
  s.mean = s.total / static_cast<double>(seconds.size());
  std::vector<double> sorted = seconds;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return s;
}

ErrorReport build_error_report(const ClosedLoopRecord& record,
                               const std::vector<Profile>& oracle_profiles,
                               const ScenarioConfig& cfg) {
  if (oracle_profiles.size() != record.profiles.size()) {
    throw DomainError("build_error_report: " + std::to_string(oracle_profiles.size()) +
                      " oracle profiles for " + std::to_string(record.profiles.size()) + " instants");
  }
  ErrorReport rep;
  rep.algorithm = to_string(cfg.solver.algorithm);
  rep.method = to_string(cfg.solver.method);
  rep.k = cfg.solver.k_iters;
  for (std::size_t t = 1; t < record.profiles.size(); ++t) {
    rep.per_instant.push_back(compute_error(record.profiles[t], oracle_profiles[t]));
  }
  if (!rep.per_instant.empty()) {
    rep.mean_error = std::accumulate(rep.per_instant.begin(), rep.per_instant.end(), 0.0) /
                     static_cast<double>(rep.per_instant.size());
    rep.max_error = *std::max_element(rep.per_instant.begin(), rep.per_instant.end());
  }
  rep.solver_time = summarize_times(record.wall_times);
  return rep;
}

}  // namespace tdgame
