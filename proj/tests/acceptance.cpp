// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <string>

#include "support.hpp"
#include "tdgame/bench.hpp"

using namespace tdgame;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s [%d] %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

std::vector<State> random_states(std::size_t n, std::mt19937_64& rng) {
  std::vector<State> x0;
  for (std::size_t i = 0; i < n; ++i) x0.push_back(testing::random_state(rng));
  return x0;
}

// Two error values closer than this are the same number up to the rounding
// floor of the solvers and the oracle; ordinal comparisons treat them as ties.
constexpr double kTie = 1e-12;
bool not_above(double a, double b) { return a <= b + kTie; }

void potential_identity() {
  const auto start = Clock::now();
  const ScenarioConfig cfg = default_scenario();
  const CostModel<double> model(cfg);
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> pick(0, 4);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto x0 = random_states(5, rng);
    const Profile u = testing::random_profile(5, 10, cfg.u_max, rng);
    Profile u2 = u;
    const std::size_t i = pick(rng);
    u2.sequence(i) = testing::random_profile(1, 10, cfg.u_max, rng).flat();
    const double phi = model.potential(x0, u);
    const double gap = std::abs((model.individual_cost(x0, u2, i) - model.individual_cost(x0, u, i)) -
                                (model.potential(x0, u2) - phi));
    worst = std::max(worst, gap / (1e-10 * (1.0 + std::abs(phi))));
  }
  const double secs = seconds_since(start);
  report(1, "potential-game identity", worst < 1.0 && secs < 5.0,
         "worst gap " + fmt("%.3g", worst) + " of tolerance, " + fmt("%.2f s", secs));
}

void derivative_correctness() {
  const auto start = Clock::now();
  const ScenarioConfig cfg = default_scenario();
  const CostModel<double> model(cfg);
  std::mt19937_64 rng(202);
  double grad_err = 0.0;
  double hess_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto x0 = random_states(5, rng);
    const Profile p = testing::random_profile(5, 10, cfg.u_max, rng);
    const auto at = [&](const VectorXd& f) { return Profile::from_flat(5, 10, f); };
    const auto full = model.potential_derivatives(x0, p);
    grad_err = std::max(grad_err, testing::rel_diff(full.gradient, testing::fd_gradient(
                                                                       [&](const VectorXd& f) {
                                                                         return model.potential(x0, at(f));
                                                                       },
                                                                       p.flat(), 1e-5)));
    hess_err = std::max(hess_err, testing::rel_diff(full.hessian, testing::fd_jacobian(
                                                                      [&](const VectorXd& f) {
                                                                        return VectorXd(model.potential_derivatives(
                                                                            x0, at(f), Order::gradient).gradient);
                                                                      },
                                                                      p.flat(), 1e-5)));
    for (std::size_t i = 0; i < 5; ++i) {
      const auto with_own = [&](const VectorXd& s) {
        Profile q = p;
        q.sequence(i) = s;
        return q;
      };
      const VectorXd own = p.sequence(i);
      const auto bi = model.best_response_derivatives(x0, p, i);
      grad_err = std::max(grad_err, testing::rel_diff(bi.gradient, testing::fd_gradient(
                                                                       [&](const VectorXd& s) {
                                                                         return model.individual_cost(x0, with_own(s), i);
                                                                       },
                                                                       own, 1e-5)));
      hess_err = std::max(hess_err, testing::rel_diff(bi.hessian, testing::fd_jacobian(
                                                                      [&](const VectorXd& s) {
                                                                        return VectorXd(model.best_response_derivatives(
                                                                            x0, with_own(s), i, Order::gradient).gradient);
                                                                      },
                                                                      own, 1e-5)));
    }
  }
  const double secs = seconds_since(start);
  report(2, "derivative correctness", grad_err < 1e-5 && hess_err < 1e-4 && secs < 30.0,
         "gradient rel err " + fmt("%.2e", grad_err) + ", Hessian rel err " + fmt("%.2e", hess_err) + ", " +
             fmt("%.2f s", secs));
}

void quadratic_exactness() {
  // No interaction, lane-tracking speed cost: the potential is quadratic.
  // Initial velocities within dt * u_max of the lane velocity keep its
  // minimizer strictly inside the input balls.
  ScenarioConfig cfg = default_scenario();
  cfg.beta = 0.0;
  cfg.headings = {0.0, M_PI, M_PI / 2, -M_PI / 2, 0.0};
  cfg.initial_states[0].tail<2>() << 4.4, 0.3;
  cfg.initial_states[1].tail<2>() << -5.5, 0.4;
  cfg.initial_states[2].tail<2>() << -0.2, 4.5;
  cfg.initial_states[3].tail<2>() << 0.5, -5.2;
  const CostModel<double> model(cfg);
  std::mt19937_64 rng(303);
  double worst_grad = 0.0;
  double worst_gap = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Profile start = testing::random_profile(5, 10, cfg.u_max, rng);
    const VectorXd one = newton_step(start.flat(), model.potential_derivatives(cfg.initial_states, start), 0.0, cfg.u_max);
    const auto g = model.potential_derivatives(cfg.initial_states, Profile::from_flat(5, 10, one), Order::gradient);
    worst_grad = std::max(worst_grad, g.gradient.lpNorm<Eigen::Infinity>());

    SolverSettings s = cfg.solver;
    s.k_iters = 5;
    s.method = Method::newton;
    const auto newton = solve_potential(model, cfg.initial_states, start, s, SolveMode::time_distributed, cfg.u_max);
    s.method = Method::newton_kantorovich;
    const auto nk = solve_potential(model, cfg.initial_states, start, s, SolveMode::time_distributed, cfg.u_max);
    for (std::size_t k = 0; k < newton.trace.iterates.size(); ++k) {
      worst_gap = std::max(worst_gap, (newton.trace.iterates[k] - nk.trace.iterates[k]).lpNorm<Eigen::Infinity>());
    }
  }
  report(3, "quadratic exactness", worst_grad < 1e-9 && worst_gap < 1e-12,
         "gradient after one step " + fmt("%.2e", worst_grad) + ", Newton/NK iterate gap " + fmt("%.2e", worst_gap));
}

void jacobian_reuse(const ExperimentResult& exp) {
  bool ok = true;
  std::string detail;
  for (const CellResult& c : exp.cells) {
    if (!c.ok) continue;
    for (const IterationTrace& tr : c.record.traces) {
      int expected = 0;
      if (c.algorithm == Algorithm::potential) {
        expected = c.method == Method::newton ? c.k : 1;
      } else {
        // Best response solves one problem per vehicle: Newton factorizes at
        // every iteration of every inner solve, Newton-Kantorovich once per
        // vehicle problem for the whole instant.
        expected = c.method == Method::newton ? c.k * tr.inner_solves : static_cast<int>(c.record.states[0].size());
      }
      if (tr.jacobian_rebuilds != expected) {
        ok = false;
        detail = to_string(c.algorithm) + "/" + to_string(c.method) + " K=" + std::to_string(c.k) + ": " +
                 std::to_string(tr.jacobian_rebuilds) + " rebuilds, expected " + std::to_string(expected);
      }
    }
  }
  report(4, "Jacobian-reuse contract", ok,
         ok ? "potential: K (Newton) / 1 (NK) per instant; best response: K per inner solve (Newton) / 1 per "
              "vehicle problem (NK)"
            : detail);
}

using CellKey = std::tuple<Algorithm, Method, int>;

void error_monotonicity(const std::map<CellKey, const CellResult*>& cells, double secs) {
  bool ok = true;
  std::string detail;
  for (Algorithm a : {Algorithm::potential, Algorithm::best_response}) {
    for (Method m : {Method::newton, Method::newton_kantorovich}) {
      const auto& e2 = cells.at({a, m, 2})->report;
      const auto& e3 = cells.at({a, m, 3})->report;
      const auto& e5 = cells.at({a, m, 5})->report;
      const bool mono = not_above(e5.mean_error, e3.mean_error) && not_above(e3.mean_error, e2.mean_error) &&
                        not_above(e5.max_error, e3.max_error) && not_above(e3.max_error, e2.max_error);
      ok = ok && mono;
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%s%s/%s mean %.3g>=%.3g>=%.3g max %.3g>=%.3g>=%.3g%s",
                    detail.empty() ? "" : "; ", to_string(a).c_str(), to_string(m).c_str(), e2.mean_error,
                    e3.mean_error, e5.mean_error, e2.max_error, e3.max_error, e5.max_error, mono ? "" : " (violated)");
      detail += buf;
    }
  }
  ok = ok && secs < 300.0;
  report(5, "error decreases with K", ok, detail + "; sweep " + fmt("%.1f s", secs));
}

void newton_beats_nk(const std::map<CellKey, const CellResult*>& cells) {
  bool ok = true;
  std::string detail;
  for (int k : {2, 3, 5}) {
    const double newton = cells.at({Algorithm::potential, Method::newton, k})->report.mean_error;
    const double nk = cells.at({Algorithm::potential, Method::newton_kantorovich, k})->report.mean_error;
    ok = ok && nk >= newton;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%sK=%d NK %.3g vs Newton %.3g", detail.empty() ? "" : ", ", k, nk, newton);
    detail += buf;
  }
  report(6, "NK less accurate than Newton (potential)", ok, detail);
}

void peak_localization(const std::map<CellKey, const CellResult*>& cells) {
  bool ok = true;
  std::string detail;
  for (Method m : {Method::newton, Method::newton_kantorovich}) {
    const CellResult& c = *cells.at({Algorithm::potential, m, 2});
    std::vector<double> dist;
    for (const auto& s : c.record.states) dist.push_back(min_pairwise_distance(s));
    const auto closest = static_cast<std::size_t>(std::min_element(dist.begin(), dist.end()) - dist.begin());
    const double dmin = dist[closest];
    std::size_t lo = closest;
    std::size_t hi = closest;
    while (lo > 0 && dist[lo - 1] < 2.0 * dmin) --lo;
    while (hi + 1 < dist.size() && dist[hi + 1] < 2.0 * dmin) ++hi;

    // per_instant[t - 1] is the error at instant t.
    const auto& err = c.report.per_instant;
    const auto peak_idx = static_cast<std::size_t>(std::max_element(err.begin(), err.end()) - err.begin());
    const std::size_t peak_t = peak_idx + 1;
    const double peak = err[peak_idx];
    double outside = 0.0;
    for (std::size_t t = 1; t <= err.size(); ++t) {
      if (t < lo || t > hi) outside = std::max(outside, err[t - 1]);
    }
    const bool pass = peak_t >= lo && peak_t <= hi && outside < 0.05 * peak;
    ok = ok && pass;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s%s: window t=[%zu,%zu], peak %.3g at t=%zu, outside max %.3g", detail.empty() ? "" : "; ",
                  to_string(m).c_str(), lo, hi, peak, peak_t, outside);
    detail += buf;
  }
  report(7, "error peak inside interaction window (K=2, potential)", ok, detail);
}

void ordinal_timing(const std::map<CellKey, const CellResult*>& cells) {
  bool ok = true;
  std::string detail;
  std::map<std::pair<Algorithm, Method>, double> solver;
  for (Algorithm a : {Algorithm::potential, Algorithm::best_response}) {
    const CellResult& newton = *cells.at({a, Method::newton, 3});
    const CellResult& nk = *cells.at({a, Method::newton_kantorovich, 3});
    std::vector<double> oracle_times = newton.oracle_times;
    oracle_times.insert(oracle_times.end(), nk.oracle_times.begin(), nk.oracle_times.end());
    const double oracle = summarize_times(oracle_times).median;
    const double t_newton = newton.report.solver_time.median;
    const double t_nk = nk.report.solver_time.median;
    solver[{a, Method::newton}] = t_newton;
    solver[{a, Method::newton_kantorovich}] = t_nk;
    ok = ok && t_nk < t_newton && t_newton < oracle;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s%s NK %.3g ms < Newton %.3g ms < oracle %.3g ms", detail.empty() ? "" : "; ",
                  to_string(a).c_str(), 1e3 * t_nk, 1e3 * t_newton, 1e3 * oracle);
    detail += buf;
  }
  for (Method m : {Method::newton, Method::newton_kantorovich}) {
    ok = ok && solver[{Algorithm::best_response, m}] > solver[{Algorithm::potential, m}];
  }
  report(8, "ordinal timing at K=3", ok, detail + "; best response slower than potential for each method");
}

void ne_verification(const std::map<CellKey, const CellResult*>& cells, const ScenarioConfig& cfg) {
  const CostModel<double> model(cfg);
  double worst = -1.0;
  std::string instants;
  for (Algorithm a : {Algorithm::potential, Algorithm::best_response}) {
    const CellResult& c = *cells.at({a, Method::newton, 2});
    const std::size_t last = c.oracle_profiles.size() - 1;
    instants.clear();
    for (int j = 0; j < 5; ++j) {
      const std::size_t t = 1 + static_cast<std::size_t>(j) * (last - 1) / 4;
      instants += (j ? "," : "") + std::to_string(t);
      worst = std::max(worst, max_unilateral_improvement(model, c.record.states[t], c.oracle_profiles[t], cfg.u_max, 200,
                                                         1000 + t));
    }
  }
  report(9, "oracle solutions are Nash equilibria", worst <= 1e-6,
         "largest unilateral improvement " + fmt("%.3g", worst) + " over t={" + instants + "}, both algorithms");
}

void closed_loop_sanity(const std::map<CellKey, const CellResult*>& cells, const ScenarioConfig& cfg) {
  bool ok = true;
  double dmin = std::numeric_limits<double>::infinity();
  double umax = 0.0;
  bool reproducible = true;
  for (Algorithm a : {Algorithm::potential, Algorithm::best_response}) {
    for (Method m : {Method::newton, Method::newton_kantorovich}) {
      const CellResult& c = *cells.at({a, m, 5});
      ok = ok && c.ok;
      for (const auto& s : c.record.states) dmin = std::min(dmin, min_pairwise_distance(s));
      for (const auto& step : c.record.applied_inputs) {
        for (const auto& u : step) umax = std::max(umax, u.norm());
      }
      ScenarioConfig run = cfg;
      run.solver.algorithm = a;
      run.solver.method = m;
      run.solver.k_iters = 5;
      const Profile initial = c.record.warmstarts.front();
      const auto again = run_closed_loop(run, run.solver, [&](const std::vector<State>&) { return initial; });
      reproducible = reproducible && again.states == c.record.states && again.applied_inputs == c.record.applied_inputs &&
                     again.profiles == c.record.profiles;
    }
  }
  ok = ok && dmin > cfg.safety_floor && umax <= cfg.u_max * (1.0 + 1e-12) && reproducible;
  report(10, "closed-loop sanity at K=5", ok,
         "min distance " + fmt("%.3f m", dmin) + " (floor " + fmt("%.1f", cfg.safety_floor) + "), max |u| " +
             fmt("%.6f", umax) + ", " + (reproducible ? "bit-reproducible" : "NOT reproducible"));
}

void br_fixed_point(const ScenarioConfig& cfg) {
  const CostModel<double> model(cfg);
  const auto ne = oracle_solve(model, cfg.initial_states, cfg, Algorithm::best_response, cfg.oracle, std::nullopt);
  const double improvement = max_unilateral_improvement(model, cfg.initial_states, ne.profile, cfg.u_max, 200, 7);
  bool ok = improvement <= 1e-6;
  double movement = 0.0;
  for (SolveMode mode : {SolveMode::converged, SolveMode::time_distributed}) {
    for (Method m : {Method::newton, Method::newton_kantorovich}) {
      SolverSettings s = cfg.solver;
      s.method = m;
      const auto r = best_response_sweep(model, cfg.initial_states, ne.profile, s, mode, cfg.u_max);
      ok = ok && r.sweeps == 1 && r.converged && r.last_change < s.eps_br;
      movement = std::max(movement, r.last_change);
    }
  }
  report(11, "best-response fixed point", ok,
         "one sweep in every mode/method, movement " + fmt("%.3g", movement) + " < eps " + fmt("%.0e", cfg.solver.eps_br) +
             " (NE improvement " + fmt("%.3g", improvement) + ")");
}

}  // namespace

int main() {
  potential_identity();
  derivative_correctness();
  quadratic_exactness();

  ExperimentPlan plan;
  plan.scenario = default_scenario();
  plan.methods = {Method::newton, Method::newton_kantorovich};
  plan.algorithms = {Algorithm::potential, Algorithm::best_response};
  plan.k_values = {2, 3, 5};
  plan.repetitions = 3;
  plan.workers = 1;
  const auto start = Clock::now();
  const ExperimentResult exp = run_experiment(plan);
  const double sweep_secs = seconds_since(start);

  std::map<CellKey, const CellResult*> cells;
  bool all_ok = exp.all_ok;
  for (const CellResult& c : exp.cells) {
    cells[{c.algorithm, c.method, c.k}] = &c;
    if (!c.ok) std::printf("cell %s/%s K=%d failed: %s\n", to_string(c.algorithm).c_str(), to_string(c.method).c_str(), c.k,
                           c.error.c_str());
  }
  if (!all_ok || cells.size() != 12) {
    for (int id = 4; id <= 10; ++id) report(id, "experiment-based criterion", false, "experiment sweep failed");
  } else {
    jacobian_reuse(exp);
    error_monotonicity(cells, sweep_secs);
    newton_beats_nk(cells);
    peak_localization(cells);
    ordinal_timing(cells);
    ne_verification(cells, plan.scenario);
    closed_loop_sanity(cells, plan.scenario);
  }
  br_fixed_point(plan.scenario);

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
