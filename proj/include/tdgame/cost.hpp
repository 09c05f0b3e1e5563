#pragma once

// Speed-tracking and pairwise-proximity costs, the individual costs built from
// them, the exact potential of the resulting game, and analytic first and
// second derivatives with respect to the flattened controls.
//
// Because the dynamics are linear, the predicted velocities and positions at
// steps 1..T are affine in a vehicle's own controls:
//
//   v(tau+1) = v0 + dt * sum_{s <= tau} u(s)
//   r(tau+1) = r0 + (tau+1) dt v0 + dt^2 * sum_{s < tau} (tau - s) u(s)
//
// so all derivatives are chain-ruled through two constant 2T x 2T sensitivity
// matrices.

#include <algorithm>
#include <vector>

#include "tdgame/dynamics.hpp"
#include "tdgame/scenario.hpp"

namespace tdgame {

enum class Order { value, gradient, hessian };

template <typename Scalar>
struct DerivativeBundle {
  Scalar value = Scalar(0);
  Vector<Scalar> gradient;
  Matrix<Scalar> hessian;  // empty unless Order::hessian was requested
};

template <typename Scalar>
struct CostBreakdown {
  std::vector<Scalar> self_costs;
  /// Unordered pairs (i, j) with j < i, stored row-wise: index i*(i-1)/2 + j.
  std::vector<Scalar> pair_costs;
  std::vector<Scalar> individual_costs;
  Scalar potential = Scalar(0);

  Scalar pair(std::size_t i, std::size_t j) const {
    if (i < j) std::swap(i, j);
    return pair_costs[i * (i - 1) / 2 + j];
  }
};

/// Sum over the T predicted steps of ((|v(tau+1)| - v_ref) / v_ref)^2.
template <typename Scalar>
Scalar eval_self_cost(const StateTrajectory<Scalar>& traj, Scalar v_ref) {
  if (!(v_ref > Scalar(0))) throw DomainError("eval_self_cost: v_ref must be positive");
  Scalar sum(0);
  for (std::size_t k = 1; k < traj.size(); ++k) {
    const Scalar rel = (traj[k].template tail<2>().norm() - v_ref) / v_ref;
    sum += rel * rel;
  }
  return sum;
}

/// Sum over the T predicted steps of |v(tau+1) - v_ref * heading|^2 / v_ref^2.
/// Equals eval_self_cost whenever the vehicle moves forward along its lane.
template <typename Scalar>
Scalar eval_lane_self_cost(const StateTrajectory<Scalar>& traj, Scalar v_ref,
                           const ControlInput<Scalar>& heading) {
  if (!(v_ref > Scalar(0))) throw DomainError("eval_lane_self_cost: v_ref must be positive");
  Scalar sum(0);
  for (std::size_t k = 1; k < traj.size(); ++k) {
    sum += (traj[k].template tail<2>() - v_ref * heading).squaredNorm() / (v_ref * v_ref);
  }
  return sum;
}

/// Sum over the T predicted steps of 1 / (|r_i(tau+1) - r_j(tau+1)|^2 + delta).
template <typename Scalar>
Scalar eval_pair_cost(const StateTrajectory<Scalar>& traj_i, const StateTrajectory<Scalar>& traj_j,
                      Scalar delta) {
  if (traj_i.size() != traj_j.size()) throw DomainError("eval_pair_cost: trajectory lengths differ");
  if (!(delta > Scalar(0))) throw DomainError("eval_pair_cost: delta must be positive");
  Scalar sum(0);
  for (std::size_t k = 1; k < traj_i.size(); ++k) {
    const auto d = (traj_i[k].template head<2>() - traj_j[k].template head<2>()).eval();
    sum += Scalar(1) / (d.squaredNorm() + delta);
  }
  return sum;
}

template <typename Scalar>
class CostModel {
 public:
  using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

  explicit CostModel(const ScenarioConfig& cfg)
      : n_(static_cast<std::size_t>(cfg.n_vehicles)),
        horizon_(static_cast<std::size_t>(cfg.horizon_T)),
        dt_(static_cast<Scalar>(cfg.dt)),
        alpha_(static_cast<Scalar>(cfg.alpha)),
        beta_(static_cast<Scalar>(cfg.beta)),
        delta_(static_cast<Scalar>(cfg.delta)),
        speed_model_(cfg.speed_model) {
    if (cfg.v_ref.size() != n_) throw DomainError("CostModel: v_ref size differs from n_vehicles");
    for (double v : cfg.v_ref) v_ref_.push_back(static_cast<Scalar>(v));
    for (const auto& d : cfg.lane_directions()) lanes_.push_back(d.cast<Scalar>());
    if (speed_model_ == SpeedModel::lane && lanes_.size() != n_) {
      throw DomainError("CostModel: lane headings size differs from n_vehicles");
    }
    const auto m = static_cast<Eigen::Index>(2 * horizon_);
    vel_sens_ = Matrix<Scalar>::Zero(m, m);
    pos_sens_ = Matrix<Scalar>::Zero(m, m);
    for (Eigen::Index tau = 0; tau < static_cast<Eigen::Index>(horizon_); ++tau) {
      for (Eigen::Index s = 0; s <= tau; ++s) {
        vel_sens_.template block<2, 2>(2 * tau, 2 * s) = dt_ * Mat2::Identity();
        pos_sens_.template block<2, 2>(2 * tau, 2 * s) =
            dt_ * dt_ * static_cast<Scalar>(tau - s) * Mat2::Identity();
      }
    }
  }

  std::size_t n_vehicles() const { return n_; }
  std::size_t horizon() const { return horizon_; }
  const Matrix<Scalar>& velocity_sensitivity() const { return vel_sens_; }
  const Matrix<Scalar>& position_sensitivity() const { return pos_sens_; }

  CostBreakdown<Scalar> breakdown(const std::vector<VehicleState<Scalar>>& x0_all,
                                  const JointProfile<Scalar>& profile) const {
    check(x0_all, profile);
    const auto trajs = rollout<Scalar>(x0_all, profile, dt_);
    CostBreakdown<Scalar> out;
    out.self_costs.resize(n_);
    out.individual_costs.assign(n_, Scalar(0));
    for (std::size_t i = 0; i < n_; ++i) {
      out.self_costs[i] = speed_model_ == SpeedModel::lane
                              ? eval_lane_self_cost(trajs[i], v_ref_[i], Vec2(lanes_[i]))
                              : eval_self_cost(trajs[i], v_ref_[i]);
    }
    Scalar pair_sum(0);
    for (std::size_t i = 1; i < n_; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        out.pair_costs.push_back(eval_pair_cost(trajs[i], trajs[j], delta_));
      }
    }
    Scalar self_sum(0);
    for (std::size_t i = 0; i < n_; ++i) {
      Scalar interaction(0);
      for (std::size_t j = 0; j < n_; ++j) {
        if (j != i) interaction += out.pair(i, j);
      }
      out.individual_costs[i] = alpha_ * out.self_costs[i] + beta_ * interaction;
      self_sum += out.self_costs[i];
    }
    for (const Scalar& p : out.pair_costs) pair_sum += p;
    out.potential = alpha_ * self_sum + beta_ * pair_sum;
    return out;
  }

  Scalar potential(const std::vector<VehicleState<Scalar>>& x0_all,
                   const JointProfile<Scalar>& profile) const {
    return potential_derivatives(x0_all, profile, Order::value).value;
  }

  Scalar individual_cost(const std::vector<VehicleState<Scalar>>& x0_all,
                         const JointProfile<Scalar>& profile, std::size_t i) const {
    return best_response_derivatives(x0_all, profile, i, Order::value).value;
  }

  /// Value, gradient and (optionally) Hessian of the potential over all 2NT controls.
  DerivativeBundle<Scalar> potential_derivatives(const std::vector<VehicleState<Scalar>>& x0_all,
                                                 const JointProfile<Scalar>& profile,
                                                 Order order = Order::hessian) const {
    check(x0_all, profile);
    const auto trajs = rollout<Scalar>(x0_all, profile, dt_);
    const Eigen::Index m = profile.vehicle_dim();
    DerivativeBundle<Scalar> out;
    if (order != Order::value) out.gradient = Vector<Scalar>::Zero(profile.dim());
    if (order == Order::hessian) out.hessian = Matrix<Scalar>::Zero(profile.dim(), profile.dim());

    for (std::size_t i = 0; i < n_; ++i) {
      const Term term = self_term(trajs[i], i, order);
      out.value += alpha_ * term.value;
      if (order == Order::value) continue;
      const Eigen::Index oi = profile.offset(i);
      out.gradient.segment(oi, m) += alpha_ * (vel_sens_.transpose() * term.grad);
      if (order == Order::hessian) {
        out.hessian.block(oi, oi, m, m) += alpha_ * sandwich(vel_sens_, term.hess);
      }
    }
    if (beta_ == Scalar(0) && order == Order::value) return out;

    for (std::size_t i = 1; i < n_; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        const Term term = pair_term(trajs[i], trajs[j], order);
        out.value += beta_ * term.value;
        if (order == Order::value || beta_ == Scalar(0)) continue;
        const Vector<Scalar> g = beta_ * (pos_sens_.transpose() * term.grad);
        const Eigen::Index oi = profile.offset(i);
        const Eigen::Index oj = profile.offset(j);
        out.gradient.segment(oi, m) += g;
        out.gradient.segment(oj, m) -= g;
        if (order == Order::hessian) {
          const Matrix<Scalar> h = beta_ * sandwich(pos_sens_, term.hess);
          out.hessian.block(oi, oi, m, m) += h;
          out.hessian.block(oj, oj, m, m) += h;
          out.hessian.block(oi, oj, m, m) -= h;
          out.hessian.block(oj, oi, m, m) -= h;
        }
      }
    }
    return out;
  }

  /// Value, gradient and (optionally) Hessian of vehicle i's individual cost
  /// over its own 2T controls, the other vehicles held fixed.
  DerivativeBundle<Scalar> best_response_derivatives(
      const std::vector<VehicleState<Scalar>>& x0_all, const JointProfile<Scalar>& profile,
      std::size_t i, Order order = Order::hessian) const {
    check(x0_all, profile);
    if (i >= n_) {
      throw DomainError("best_response_derivatives: vehicle index " + std::to_string(i) +
                        " out of range for " + std::to_string(n_) + " vehicles");
    }
    const auto trajs = rollout<Scalar>(x0_all, profile, dt_);
    DerivativeBundle<Scalar> out;

    const Term self = self_term(trajs[i], i, order);
    out.value = alpha_ * self.value;
    if (order != Order::value) out.gradient = alpha_ * (vel_sens_.transpose() * self.grad);
    if (order == Order::hessian) out.hessian = alpha_ * sandwich(vel_sens_, self.hess);

    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i) continue;
      // Always evaluate with the larger index first so V_ij and V_ji are the same number.
      const bool i_first = i > j;
      const Term term = i_first ? pair_term(trajs[i], trajs[j], order) : pair_term(trajs[j], trajs[i], order);
      out.value += beta_ * term.value;
      if (order == Order::value || beta_ == Scalar(0)) continue;
      const Vector<Scalar> g = beta_ * (pos_sens_.transpose() * term.grad);
      out.gradient += i_first ? g : Vector<Scalar>(-g);
      if (order == Order::hessian) out.hessian += beta_ * sandwich(pos_sens_, term.hess);
    }
    return out;
  }

 private:
  // Derivatives of a stage-summed term with respect to the stacked per-step
  // 2-vectors it depends on (velocities for the self term, relative position
  // for the pair term). The Hessian is block diagonal in those 2-vectors.
  struct Term {
    Scalar value = Scalar(0);
    Vector<Scalar> grad;
    std::vector<Mat2> hess;
  };

  void check(const std::vector<VehicleState<Scalar>>& x0_all, const JointProfile<Scalar>& profile) const {
    if (x0_all.size() != n_ || profile.n_vehicles() != n_ || profile.horizon() != horizon_) {
      throw DomainError("CostModel: expected " + std::to_string(n_) + " vehicles and horizon " +
                        std::to_string(horizon_) + ", got " + std::to_string(x0_all.size()) +
                        " states and a " + std::to_string(profile.n_vehicles()) + "x" +
                        std::to_string(profile.horizon()) + " profile");
    }
  }

  Term self_term(const StateTrajectory<Scalar>& traj, std::size_t i, Order order) const {
    Term t;
    const auto T = static_cast<Eigen::Index>(horizon_);
    const Scalar v_ref = v_ref_[i];
    if (order != Order::value) t.grad = Vector<Scalar>::Zero(2 * T);
    if (order == Order::hessian) t.hess.resize(horizon_);
    const Scalar inv_ref2 = Scalar(1) / (v_ref * v_ref);
    for (Eigen::Index tau = 0; tau < T; ++tau) {
      const Vec2 v = traj[static_cast<std::size_t>(tau) + 1].template tail<2>();
      if (speed_model_ == SpeedModel::lane) {
        const Vec2 err = v - v_ref * lanes_[i];
        t.value += err.squaredNorm() * inv_ref2;
        if (order != Order::value) t.grad.template segment<2>(2 * tau) = Scalar(2) * inv_ref2 * err;
        if (order == Order::hessian) t.hess[static_cast<std::size_t>(tau)] = Scalar(2) * inv_ref2 * Mat2::Identity();
        continue;
      }
      const Scalar speed = v.norm();
      const Scalar rel = (speed - v_ref) / v_ref;
      t.value += rel * rel;
      if (order == Order::value) continue;
      // |v| is not differentiable at 0; the guard keeps stalled vehicles finite.
      const Scalar s = std::max(speed, Scalar(1e-9));
      const Vec2 n = v / s;
      t.grad.template segment<2>(2 * tau) = Scalar(2) * (s - v_ref) * inv_ref2 * n;
      if (order == Order::hessian) {
        const Mat2 nn = n * n.transpose();
        t.hess[static_cast<std::size_t>(tau)] =
            Scalar(2) * inv_ref2 * (nn + (Scalar(1) - v_ref / s) * (Mat2::Identity() - nn));
      }
    }
    return t;
  }

  // Derivatives with respect to d = r_first - r_second.
  Term pair_term(const StateTrajectory<Scalar>& first, const StateTrajectory<Scalar>& second,
                 Order order) const {
    Term t;
    const auto T = static_cast<Eigen::Index>(horizon_);
    if (order != Order::value) t.grad = Vector<Scalar>::Zero(2 * T);
    if (order == Order::hessian) t.hess.resize(horizon_);
    for (Eigen::Index tau = 0; tau < T; ++tau) {
      const auto k = static_cast<std::size_t>(tau) + 1;
      const Vec2 d = first[k].template head<2>() - second[k].template head<2>();
      const Scalar q = d.squaredNorm() + delta_;
      t.value += Scalar(1) / q;
      if (order == Order::value) continue;
      const Scalar q2 = q * q;
      t.grad.template segment<2>(2 * tau) = Scalar(-2) / q2 * d;
      if (order == Order::hessian) {
        t.hess[static_cast<std::size_t>(tau)] =
            Scalar(-2) / q2 * Mat2::Identity() + Scalar(8) / (q2 * q) * (d * d.transpose());
      }
    }
    return t;
  }

  // S^T * blockdiag(blocks) * S, symmetrized.
  static Matrix<Scalar> sandwich(const Matrix<Scalar>& sens, const std::vector<Mat2>& blocks) {
    Matrix<Scalar> weighted(sens.rows(), sens.cols());
    for (std::size_t tau = 0; tau < blocks.size(); ++tau) {
      const auto r = static_cast<Eigen::Index>(2 * tau);
      weighted.middleRows(r, 2).noalias() = blocks[tau] * sens.middleRows(r, 2);
    }
    Matrix<Scalar> h = sens.transpose() * weighted;
    return Scalar(0.5) * (h + h.transpose());
  }

  std::size_t n_;
  std::size_t horizon_;
  Scalar dt_;
  Scalar alpha_;
  Scalar beta_;
  Scalar delta_;
  SpeedModel speed_model_;
  std::vector<Scalar> v_ref_;
  std::vector<Vec2> lanes_;
  Matrix<Scalar> vel_sens_;
  Matrix<Scalar> pos_sens_;
};

template <typename Scalar>
CostBreakdown<Scalar> eval_breakdown(const std::vector<VehicleState<Scalar>>& x0_all,
                                     const JointProfile<Scalar>& profile, const ScenarioConfig& cfg) {
  return CostModel<Scalar>(cfg).breakdown(x0_all, profile);
}

template <typename Scalar>
DerivativeBundle<Scalar> potential_derivatives(const std::vector<VehicleState<Scalar>>& x0_all,
                                               const JointProfile<Scalar>& profile,
                                               const ScenarioConfig& cfg) {
  return CostModel<Scalar>(cfg).potential_derivatives(x0_all, profile);
}

template <typename Scalar>
DerivativeBundle<Scalar> best_response_derivatives(const std::vector<VehicleState<Scalar>>& x0_all,
                                                   const JointProfile<Scalar>& profile,
                                                   std::size_t i, const ScenarioConfig& cfg) {
  return CostModel<Scalar>(cfg).best_response_derivatives(x0_all, profile, i);
}

using Derivatives = DerivativeBundle<double>;

}  // namespace tdgame
