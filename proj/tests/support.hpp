#pragma once

// Independent reference computations used as test oracles. Nothing here calls
// into the library's cost or derivative code: rollouts use hand-written
// matrices, costs are summed straight from their definitions, and derivatives
// come from central finite differences.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "tdgame/types.hpp"

namespace tdgame::testing {

inline State random_state(std::mt19937_64& rng, double pos_scale = 15.0, double vel_scale = 6.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return State(pos_scale * u(rng), pos_scale * u(rng), vel_scale * u(rng), vel_scale * u(rng));
}

inline Profile random_profile(std::size_t n, std::size_t horizon, double u_max, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Profile p(n, horizon);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t tau = 0; tau < horizon; ++tau) {
      const double r = u_max * std::sqrt(unit(rng));
      const double th = 2.0 * M_PI * unit(rng);
      p.input(i, tau) = Input(r * std::cos(th), r * std::sin(th));
    }
  }
  return p;
}

/// x(k+1) = A x(k) + B u(k) with the matrices written out by hand.
inline std::vector<State> naive_rollout(const State& x0, const VectorXd& seq, double dt) {
  Eigen::Matrix4d a;
  a << 1, 0, dt, 0,  //
      0, 1, 0, dt,   //
      0, 0, 1, 0,    //
      0, 0, 0, 1;
  Eigen::Matrix<double, 4, 2> b;
  b << 0, 0,  //
      0, 0,   //
      dt, 0,  //
      0, dt;
  std::vector<State> out{x0};
  for (Eigen::Index k = 0; k < seq.size() / 2; ++k) out.push_back(a * out.back() + b * seq.segment<2>(2 * k));
  return out;
}

struct NaiveGame {
  double dt;
  double alpha;
  double beta;
  double delta;
  std::vector<double> v_ref;
  /// Unit lane directions; empty selects the Euclidean-speed self cost.
  std::vector<Eigen::Vector2d> lanes;

  double self_cost(const std::vector<State>& traj, std::size_t i) const {
    double s = 0.0;
    for (std::size_t k = 1; k < traj.size(); ++k) {
      const Eigen::Vector2d v = traj[k].tail<2>();
      if (lanes.empty()) {
        const double rel = (v.norm() - v_ref[i]) / v_ref[i];
        s += rel * rel;
      } else {
        s += (v - v_ref[i] * lanes[i]).squaredNorm() / (v_ref[i] * v_ref[i]);
      }
    }
    return s;
  }

  static double pair_cost(const std::vector<State>& a, const std::vector<State>& b, double delta) {
    double s = 0.0;
    for (std::size_t k = 1; k < a.size(); ++k) {
      const double dx = a[k](0) - b[k](0);
      const double dy = a[k](1) - b[k](1);
      s += 1.0 / (dx * dx + dy * dy + delta);
    }
    return s;
  }

  std::vector<std::vector<State>> trajectories(const std::vector<State>& x0, const Profile& p) const {
    std::vector<std::vector<State>> t;
    for (std::size_t i = 0; i < x0.size(); ++i) t.push_back(naive_rollout(x0[i], p.sequence(i), dt));
    return t;
  }

  double individual(const std::vector<State>& x0, const Profile& p, std::size_t i) const {
    const auto t = trajectories(x0, p);
    double v = alpha * self_cost(t[i], i);
    for (std::size_t j = 0; j < x0.size(); ++j) {
      if (j != i) v += beta * pair_cost(t[i], t[j], delta);
    }
    return v;
  }

  double potential(const std::vector<State>& x0, const Profile& p) const {
    const auto t = trajectories(x0, p);
    double v = 0.0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
      v += alpha * self_cost(t[i], i);
      for (std::size_t j = 0; j < i; ++j) v += beta * pair_cost(t[i], t[j], delta);
    }
    return v;
  }
};

inline VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h) {
  VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    VectorXd xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    g(k) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd&)>& g, const VectorXd& x, double h) {
  MatrixXd j(x.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    VectorXd xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    j.col(k) = (g(xp) - g(xm)) / (2.0 * h);
  }
  return j;
}

/// Infinity-norm difference relative to the reference's scale (at least 1).
template <typename A, typename B>
double rel_diff(const A& got, const B& ref) {
  const double scale = std::max(1.0, ref.template lpNorm<Eigen::Infinity>());
  return (got - ref).template lpNorm<Eigen::Infinity>() / scale;
}

/// Solves min g'(y - x) + 1/2 (y - x)' Q (y - x) over the per-step balls by
/// many projected-gradient iterations with step 1/L: slow but independent.
inline VectorXd ball_qp_reference(const MatrixXd& q, const VectorXd& x, const VectorXd& g, double r,
                                  int iters = 200000) {
  const double lip = Eigen::SelfAdjointEigenSolver<MatrixXd>(q).eigenvalues().maxCoeff();
  VectorXd y = x;
  for (int it = 0; it < iters; ++it) {
    VectorXd z = y - (g + q * (y - x)) / lip;
    for (Eigen::Index b = 0; b < z.size() / 2; ++b) {
      const double n = z.segment<2>(2 * b).norm();
      if (n > r) z.segment<2>(2 * b) *= r / n;
    }
    y = z;
  }
  return y;
}

}  // namespace tdgame::testing
