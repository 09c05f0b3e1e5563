#pragma once

// Regularized projected Newton and Newton-Kantorovich iterations, and the two
// equilibrium-seeking schemes built on them: minimizing the potential over the
// joint controls, and best-response sweeps over the vehicles.
//
// Both schemes run in one of two modes. Time-distributed mode performs exactly
// K unit steps from the supplied warmstart. Converged mode iterates with
// backtracking until the projected gradient falls below converge_tol.

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tdgame/cost.hpp"
#include "tdgame/scenario.hpp"

namespace tdgame {

enum class SolveMode { time_distributed, converged };

struct IterationTrace {
  /// Decision vector before the first and after every iteration.
  std::vector<VectorXd> iterates;
  std::vector<double> step_norms;
  /// Infinity norm of the projected gradient at each iterate a step was taken from.
  std::vector<double> grad_norms;
  /// Hessian factorizations performed.
  int jacobian_rebuilds = 0;
  /// Number of optimization problems solved (1 for the potential, one per
  /// vehicle per sweep for best response).
  int inner_solves = 0;
  int iterations = 0;

  void append(const IterationTrace& other);
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, IterationTrace trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const IterationTrace& trace() const { return trace_; }

 private:
  IterationTrace trace_;
};

/// LDLT factorization of H + mu I. A numerically singular factorization is
/// retried with mu escalated tenfold, at most six times.
class RegularizedFactorization {
 public:
  static constexpr int kMaxEscalations = 6;

  RegularizedFactorization(const MatrixXd& hessian, double mu);

  VectorXd solve(const VectorXd& rhs) const;
  MatrixXd solve(const MatrixXd& rhs) const;
  double mu() const { return mu_; }
  Eigen::Index dim() const { return ldlt_.rows(); }
  /// The factorized matrix H + mu I.
  const MatrixXd& matrix() const { return matrix_; }
  bool positive_definite() const;

 private:
  MatrixXd matrix_;
  Eigen::LDLT<MatrixXd> ldlt_;
  double mu_ = 0.0;
};

/// Solves the linearized stationarity condition
///
///   g + Q (y - xi) + N(y) \ni 0,   Q = the factorized matrix,
///
/// where N is the normal cone of the per-step input balls, i.e. the
/// ball-constrained quadratic model min_y g'(y - xi) + 1/2 (y - xi)' Q (y - xi).
/// When the unconstrained minimizer xi - Q^{-1} g is feasible it is returned
/// as is; otherwise the ball multipliers are found by projected Newton ascent
/// on the dual. If Q is not positive definite the unconstrained minimizer is
/// projected onto the balls instead.
VectorXd solve_linearized(const RegularizedFactorization& q, const VectorXd& xi, const VectorXd& grad,
                          double u_max);

/// Regularized Newton step: solve_linearized with Q = H + mu I built from bundle.
VectorXd newton_step(const VectorXd& xi, const Derivatives& bundle, double mu, double u_max);

/// Same update with a factorization frozen at the instant's first iterate.
VectorXd nk_step(const VectorXd& xi, const VectorXd& grad, const RegularizedFactorization& frozen,
                 double u_max);

/// xi - P(xi - g): zero exactly at stationary points of the ball-constrained problem.
VectorXd projected_gradient(const VectorXd& xi, const VectorXd& grad, double u_max);

/// Objective over a flat decision vector, returning derivatives up to `order`.
using Objective = std::function<Derivatives(const VectorXd&, Order)>;

/// Runs the configured method on a single objective. Used by both schemes.
/// In time-distributed Newton-Kantorovich mode an engaged `frozen` is reused
/// instead of factorizing at `start`; an empty one receives the new factorization.
VectorXd minimize(const Objective& objective, const VectorXd& start, const SolverSettings& settings,
                  SolveMode mode, double u_max, IterationTrace& trace,
                  std::optional<RegularizedFactorization>* frozen = nullptr);

struct PotentialResult {
  Profile profile;
  IterationTrace trace;
};

PotentialResult solve_potential(const CostModel<double>& model, const std::vector<State>& x0_all,
                                const Profile& warmstart, const SolverSettings& settings,
                                SolveMode mode, double u_max);

PotentialResult solve_potential(const std::vector<State>& x0_all, const Profile& warmstart,
                                const ScenarioConfig& cfg, const SolverSettings& settings,
                                SolveMode mode);

/// Minimizes vehicle i's individual cost over its own controls.
VectorXd best_response_inner(const CostModel<double>& model, const std::vector<State>& x0_all,
                             const Profile& profile, std::size_t i, const SolverSettings& settings,
                             SolveMode mode, double u_max, IterationTrace& trace,
                             std::optional<RegularizedFactorization>* frozen = nullptr);

struct SweepResult {
  Profile profile;
  int sweeps = 0;
  bool converged = false;
  /// Infinity-norm change of the last sweep.
  double last_change = 0.0;
  IterationTrace trace;
};

/// Best-response sweeps until the infinity-norm change of a sweep drops below
/// eps_br or max_br_sweeps sweeps were made. In time-distributed mode every
/// inner solve performs K iterations; Newton-Kantorovich factorizes each
/// vehicle's problem once per call and reuses it across sweeps.
SweepResult best_response_sweep(const CostModel<double>& model, const std::vector<State>& x0_all,
                                const Profile& profile, const SolverSettings& settings,
                                SolveMode mode, double u_max);

SweepResult best_response_sweep(const std::vector<State>& x0_all, const Profile& profile,
                                const ScenarioConfig& cfg, const SolverSettings& settings,
                                SolveMode mode);

}  // namespace tdgame
