#include "tdgame/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace tdgame {

namespace {

constexpr int kMaxHalvings = 30;
constexpr int kMaxLevenbergEscalations = 24;
constexpr double kEscalationFloor = 1e-10;

double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

void require_feasible(const VectorXd& xi, double u_max, const char* who) {
  if (!xi.allFinite()) throw DomainError(std::string(who) + ": non-finite warmstart");
  if (!is_feasible<double>(xi, u_max, 1e-9 * u_max)) {
    throw DomainError(std::string(who) + ": warmstart violates the input-norm bound");
  }
}

bool factorization_ok(const Eigen::LDLT<MatrixXd>& ldlt) {
  if (ldlt.info() != Eigen::Success) return false;
  const VectorXd d = ldlt.vectorD();
  if (!d.allFinite()) return false;
  const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
  return d.cwiseAbs().minCoeff() > 1e-14 * scale;
}

}  // namespace

void IterationTrace::append(const IterationTrace& other) {
  iterates.insert(iterates.end(), other.iterates.begin(), other.iterates.end());
  step_norms.insert(step_norms.end(), other.step_norms.begin(), other.step_norms.end());
  grad_norms.insert(grad_norms.end(), other.grad_norms.begin(), other.grad_norms.end());
  jacobian_rebuilds += other.jacobian_rebuilds;
  inner_solves += other.inner_solves;
  iterations += other.iterations;
}

RegularizedFactorization::RegularizedFactorization(const MatrixXd& hessian, double mu) : mu_(mu) {
  if (hessian.rows() != hessian.cols()) throw DomainError("RegularizedFactorization: non-square Hessian");
  if (!hessian.allFinite()) throw SolverError("non-finite Hessian", {});
  const auto n = hessian.rows();
  for (int attempt = 0; attempt <= kMaxEscalations; ++attempt) {
    matrix_ = hessian + mu_ * MatrixXd::Identity(n, n);
    ldlt_.compute(matrix_);
    if (factorization_ok(ldlt_)) return;
    mu_ = std::max(mu_, kEscalationFloor) * 10.0;
  }
  throw SolverError("regularized Hessian is singular after " + std::to_string(kMaxEscalations) +
                        " escalations (mu = " + std::to_string(mu_) + ")",
                    {});
}

VectorXd RegularizedFactorization::solve(const VectorXd& rhs) const {
  VectorXd x = ldlt_.solve(rhs);
  if (!x.allFinite()) throw SolverError("linear solve produced non-finite values", {});
  return x;
}

bool RegularizedFactorization::positive_definite() const {
  return ldlt_.isPositive() && ldlt_.vectorD().minCoeff() > 0.0;
}

MatrixXd RegularizedFactorization::solve(const MatrixXd& rhs) const {
  MatrixXd x = ldlt_.solve(rhs);
  if (!x.allFinite()) throw SolverError("linear solve produced non-finite values", {});
  return x;
}

namespace {

struct DualPoint {
  VectorXd y;
  double value = 0.0;
  Eigen::LLT<MatrixXd> llt;
  bool ok = false;
};

// Inner minimizer and dual value of the ball-constrained model at multipliers
// lambda >= 0 (one per 2-vector block):
//   y(lambda) = (Q + 2 Lambda)^{-1} c,  dual = -1/2 c'y - r^2 sum(lambda).
DualPoint dual_point(const MatrixXd& q, const VectorXd& c, const VectorXd& lambda, double radius) {
  DualPoint p;
  MatrixXd m = q;
  for (Eigen::Index b = 0; b < lambda.size(); ++b) m.diagonal().segment<2>(2 * b).array() += 2.0 * lambda(b);
  p.llt.compute(m);
  if (p.llt.info() != Eigen::Success) return p;
  p.y = p.llt.solve(c);
  if (!p.y.allFinite()) return p;
  p.value = -0.5 * c.dot(p.y) - radius * radius * lambda.sum();
  p.ok = true;
  return p;
}

}  // namespace

VectorXd solve_linearized(const RegularizedFactorization& q, const VectorXd& xi, const VectorXd& grad,
                          double u_max) {
  const VectorXd y0 = xi - q.solve(grad);
  const Eigen::Index blocks = y0.size() / 2;
  const double slack = 1e-12 * u_max;
  bool feasible = true;
  for (Eigen::Index b = 0; b < blocks && feasible; ++b) feasible = y0.segment<2>(2 * b).norm() <= u_max + slack;
  if (feasible) return y0;
  // An indefinite model has no well-posed constrained minimizer; fall back to
  // projecting the unconstrained step.
  if (!q.positive_definite()) return project_flat<double>(y0, u_max);

  // Projected Newton ascent on the concave dual over lambda >= 0, with the
  // binding-set rule for the bounds and an Armijo search along the projected arc.
  const MatrixXd& qm = q.matrix();
  const VectorXd c = qm * xi - grad;
  const double r2 = u_max * u_max;
  VectorXd lambda = VectorXd::Zero(blocks);
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const double norm = y0.segment<2>(2 * b).norm();
    if (norm > u_max) lambda(b) = 0.25 * qm.diagonal().segment<2>(2 * b).sum() * (norm / u_max - 1.0);
  }
  DualPoint cur = dual_point(qm, c, lambda, u_max);
  if (!cur.ok) return project_flat<double>(y0, u_max);

  const auto kkt_residual = [&](const VectorXd& lam, const VectorXd& y, VectorXd& dgrad) {
    dgrad.resize(blocks);
    for (Eigen::Index b = 0; b < blocks; ++b) dgrad(b) = y.segment<2>(2 * b).squaredNorm() - r2;
    return (lam - (lam + dgrad).cwiseMax(0.0)).lpNorm<Eigen::Infinity>();
  };
  VectorXd dgrad;
  double residual = kkt_residual(lambda, cur.y, dgrad);
  for (int it = 0; it < 100 && residual >= 1e-13 * r2; ++it) {
    const double eps = std::min(1e-3, residual);
    const auto fixed = [&](Eigen::Index b) { return lambda(b) <= eps && dgrad(b) < 0.0; };
    std::vector<Eigen::Index> free;
    for (Eigen::Index b = 0; b < blocks; ++b) {
      if (!fixed(b)) free.push_back(b);
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    // Dual Hessian on the free set: -4 y_b' [(Q + 2 Lambda)^{-1}]_{bc} y_c.
    MatrixXd ycols = MatrixXd::Zero(y0.size(), nf);
    for (Eigen::Index k = 0; k < nf; ++k) {
      const Eigen::Index b = free[static_cast<std::size_t>(k)];
      ycols.block<2, 1>(2 * b, k) = cur.y.segment<2>(2 * b);
    }
    MatrixXd neg_hess = 4.0 * ycols.transpose() * cur.llt.solve(ycols);
    VectorXd g_free(nf);
    for (Eigen::Index k = 0; k < nf; ++k) g_free(k) = dgrad(free[static_cast<std::size_t>(k)]);
    if (nf > 0) neg_hess.diagonal().array() += 1e-14 * (1.0 + neg_hess.diagonal().maxCoeff());
    const VectorXd p_free = neg_hess.ldlt().solve(g_free);

    VectorXd direction = VectorXd::Zero(blocks);
    for (Eigen::Index k = 0; k < nf; ++k) direction(free[static_cast<std::size_t>(k)]) = p_free(k);
    // Bound-fixed multipliers move along the plain gradient towards zero.
    for (Eigen::Index b = 0; b < blocks; ++b) {
      if (fixed(b)) direction(b) = dgrad(b);
    }

    // Armijo on the dual value; close to the solution the value changes drop
    // below rounding, so a step that halves the KKT residual is also accepted.
    bool moved = false;
    double step = 1.0;
    for (int h = 0; h < 40 && !moved; ++h, step *= 0.5) {
      const VectorXd trial = (lambda + step * direction).cwiseMax(0.0);
      DualPoint next = dual_point(qm, c, trial, u_max);
      if (!next.ok) continue;
      VectorXd next_grad;
      const double next_residual = kkt_residual(trial, next.y, next_grad);
      if (next.value >= cur.value + 1e-4 * dgrad.dot(trial - lambda) || next_residual < 0.5 * residual) {
        lambda = trial;
        cur = std::move(next);
        dgrad = std::move(next_grad);
        residual = next_residual;
        moved = true;
      }
    }
    if (!moved) break;
  }
  return project_flat<double>(cur.y, u_max);
}

VectorXd newton_step(const VectorXd& xi, const Derivatives& bundle, double mu, double u_max) {
  if (bundle.hessian.rows() != xi.size() || bundle.gradient.size() != xi.size()) {
    throw DomainError("newton_step: derivative bundle does not match the iterate");
  }
  const RegularizedFactorization fac(bundle.hessian, mu);
  return solve_linearized(fac, xi, bundle.gradient, u_max);
}

VectorXd nk_step(const VectorXd& xi, const VectorXd& grad, const RegularizedFactorization& frozen,
                 double u_max) {
  if (grad.size() != xi.size() || frozen.dim() != xi.size()) {
    throw DomainError("nk_step: gradient or factorization does not match the iterate");
  }
  return solve_linearized(frozen, xi, grad, u_max);
}

VectorXd projected_gradient(const VectorXd& xi, const VectorXd& grad, double u_max) {
  return xi - project_flat<double>(xi - grad, u_max);
}

namespace {

void record_step(IterationTrace& trace, const VectorXd& from, const VectorXd& to, double grad_norm) {
  trace.step_norms.push_back((to - from).norm());
  trace.grad_norms.push_back(grad_norm);
  trace.iterates.push_back(to);
  ++trace.iterations;
}

VectorXd run_time_distributed(const Objective& objective, VectorXd xi, const SolverSettings& s,
                              double u_max, IterationTrace& trace,
                              std::optional<RegularizedFactorization>* frozen_cache) {
  if (s.method == Method::newton) {
    for (int k = 0; k < s.k_iters; ++k) {
      const Derivatives b = objective(xi, Order::hessian);
      const RegularizedFactorization fac(b.hessian, s.mu);
      ++trace.jacobian_rebuilds;
      const VectorXd next = solve_linearized(fac, xi, b.gradient, u_max);
      record_step(trace, xi, next, inf_norm(projected_gradient(xi, b.gradient, u_max)));
      xi = next;
    }
    return xi;
  }

  std::optional<RegularizedFactorization> local;
  std::optional<RegularizedFactorization>& slot = frozen_cache ? *frozen_cache : local;
  VectorXd grad;
  if (!slot) {
    const Derivatives b0 = objective(xi, Order::hessian);
    slot.emplace(b0.hessian, s.mu);
    ++trace.jacobian_rebuilds;
    grad = b0.gradient;
  } else {
    grad = objective(xi, Order::gradient).gradient;
  }
  const RegularizedFactorization& frozen = *slot;
  for (int k = 0; k < s.k_iters; ++k) {
    if (k > 0) grad = objective(xi, Order::gradient).gradient;
    const VectorXd next = nk_step(xi, grad, frozen, u_max);
    record_step(trace, xi, next, inf_norm(projected_gradient(xi, grad, u_max)));
    xi = next;
  }
  return xi;
}

VectorXd run_converged(const Objective& objective, VectorXd xi, const SolverSettings& s,
                       double u_max, IterationTrace& trace) {
  Derivatives current = objective(xi, Order::hessian);
  std::optional<RegularizedFactorization> frozen;
  for (int it = 0; it < s.max_converge_iters; ++it) {
    const double pg = inf_norm(projected_gradient(xi, current.gradient, u_max));
    if (pg < s.converge_tol) return xi;

    // Newton refactorizes every iteration; Newton-Kantorovich keeps its first
    // factorization until it stops producing descent.
    bool fresh = false;
    if (s.method == Method::newton || !frozen) {
      if (current.hessian.size() == 0) current = objective(xi, Order::hessian);
      frozen.emplace(current.hessian, s.mu);
      ++trace.jacobian_rebuilds;
      fresh = true;
    }

    const double noise = 1e-13 * (1.0 + std::abs(current.value));
    double mu = frozen->mu();
    bool accepted = false;
    VectorXd next;
    for (int esc = 0; esc <= kMaxLevenbergEscalations && !accepted; ++esc) {
      // The constrained model minimizer is feasible, so the whole segment
      // towards it is too; backtrack along it.
      const VectorXd d = solve_linearized(*frozen, xi, current.gradient, u_max) - xi;
      const double slope = current.gradient.dot(d);
      if (slope < 0.0 || std::abs(slope) < noise) {
        double lambda = 1.0;
        for (int h = 0; h <= kMaxHalvings; ++h, lambda *= 0.5) {
          next = project_flat<double>(xi + lambda * d, u_max);
          const double value = objective(next, Order::value).value;
          // Below the noise floor of the objective a full step is taken as is.
          if (value <= current.value || (h == 0 && std::abs(slope) < noise)) {
            accepted = true;
            break;
          }
        }
      }
      if (accepted) break;
      if (!fresh) {
        // A stale Newton-Kantorovich factorization: rebuild it here before regularizing harder.
        if (current.hessian.size() == 0) current = objective(xi, Order::hessian);
        frozen.emplace(current.hessian, s.mu);
        ++trace.jacobian_rebuilds;
        fresh = true;
        mu = frozen->mu();
        continue;
      }
      mu = std::max(mu, kEscalationFloor) * 10.0;
      frozen.emplace(current.hessian, mu);
      ++trace.jacobian_rebuilds;
    }
    if (!accepted) {
      throw SolverError("no descent step found (projected gradient " + std::to_string(pg) + ")", trace);
    }
    if (s.method == Method::newton_kantorovich && frozen->mu() > s.mu) frozen.reset();
    record_step(trace, xi, next, pg);
    xi = next;
    current = objective(xi, s.method == Method::newton ? Order::hessian : Order::gradient);
  }
  const double pg = inf_norm(projected_gradient(xi, current.gradient, u_max));
  if (pg < s.converge_tol) return xi;
  throw SolverError("not converged after " + std::to_string(s.max_converge_iters) +
                        " iterations (projected gradient " + std::to_string(pg) + ")",
                    trace);
}

}  // namespace

VectorXd minimize(const Objective& objective, const VectorXd& start, const SolverSettings& settings,
                  SolveMode mode, double u_max, IterationTrace& trace,
                  std::optional<RegularizedFactorization>* frozen) {
  if (settings.k_iters < 1) throw DomainError("solver.k_iters must be >= 1");
  if (settings.mu < 0) throw DomainError("solver.mu must be >= 0");
  ++trace.inner_solves;
  trace.iterates.push_back(start);
  try {
    return mode == SolveMode::time_distributed
               ? run_time_distributed(objective, start, settings, u_max, trace, frozen)
               : run_converged(objective, start, settings, u_max, trace);
  } catch (const SolverError& e) {
    throw SolverError(e.what(), trace);
  }
}

PotentialResult solve_potential(const CostModel<double>& model, const std::vector<State>& x0_all,
                                const Profile& warmstart, const SolverSettings& settings,
                                SolveMode mode, double u_max) {
  require_feasible(warmstart.flat(), u_max, "solve_potential");
  const auto n = warmstart.n_vehicles();
  const auto horizon = warmstart.horizon();
  const Objective objective = [&](const VectorXd& xi, Order order) {
    return model.potential_derivatives(x0_all, Profile::from_flat(n, horizon, xi), order);
  };
  PotentialResult out;
  const VectorXd xi = minimize(objective, warmstart.flat(), settings, mode, u_max, out.trace);
  out.profile = Profile::from_flat(n, horizon, xi);
  return out;
}

PotentialResult solve_potential(const std::vector<State>& x0_all, const Profile& warmstart,
                                const ScenarioConfig& cfg, const SolverSettings& settings,
                                SolveMode mode) {
  const CostModel<double> model(cfg);
  return solve_potential(model, x0_all, warmstart, settings, mode, cfg.u_max);
}

VectorXd best_response_inner(const CostModel<double>& model, const std::vector<State>& x0_all,
                             const Profile& profile, std::size_t i, const SolverSettings& settings,
                             SolveMode mode, double u_max, IterationTrace& trace,
                             std::optional<RegularizedFactorization>* frozen) {
  if (i >= profile.n_vehicles()) {
    throw DomainError("best_response_inner: vehicle index " + std::to_string(i) + " out of range");
  }
  Profile work = profile;
  const Objective objective = [&](const VectorXd& xi, Order order) {
    work.sequence(i) = xi;
    return model.best_response_derivatives(x0_all, work, i, order);
  };
  return minimize(objective, profile.sequence(i), settings, mode, u_max, trace, frozen);
}

SweepResult best_response_sweep(const CostModel<double>& model, const std::vector<State>& x0_all,
                                const Profile& profile, const SolverSettings& settings,
                                SolveMode mode, double u_max) {
  require_feasible(profile.flat(), u_max, "best_response_sweep");
  SweepResult out;
  out.profile = profile;
  const std::size_t n = profile.n_vehicles();
  // Time-distributed Newton-Kantorovich freezes each vehicle's factorization
  // at the first sweep and reuses it for every later sweep of the call.
  std::vector<std::optional<RegularizedFactorization>> frozen(n);
  const bool reuse = mode == SolveMode::time_distributed && settings.method == Method::newton_kantorovich;
  for (int sweep = 0; sweep < settings.max_br_sweeps; ++sweep) {
    const Profile before = out.profile;
    for (std::size_t i = 0; i < n; ++i) {
      // Jacobi responds to the profile at the start of the sweep; Gauss-Seidel
      // to the freshest one.
      const Profile& opponents = settings.br_order == SweepOrder::jacobi ? before : out.profile;
      try {
        out.profile.sequence(i) =
            best_response_inner(model, x0_all, opponents, i, settings, mode, u_max, out.trace,
                                reuse ? &frozen[i] : nullptr);
      } catch (const SolverError& e) {
        throw SolverError("best response of vehicle " + std::to_string(i) + ": " + e.what(), out.trace);
      }
    }
    ++out.sweeps;
    out.last_change = inf_norm(out.profile.flat() - before.flat());
    if (out.last_change < settings.eps_br) {
      out.converged = true;
      break;
    }
  }
  return out;
}

SweepResult best_response_sweep(const std::vector<State>& x0_all, const Profile& profile,
                                const ScenarioConfig& cfg, const SolverSettings& settings,
                                SolveMode mode) {
  const CostModel<double> model(cfg);
  return best_response_sweep(model, x0_all, profile, settings, mode, cfg.u_max);
}

}  // namespace tdgame
