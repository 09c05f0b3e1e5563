#pragma once

// Discrete-time planar double integrator, horizon rollouts, and the
// Euclidean projection onto the input-norm ball.

#include "tdgame/types.hpp"

namespace tdgame {

/// x+ = A x + B u with A = [I dt*I; 0 I], B = [0; dt*I].
template <typename Scalar>
VehicleState<Scalar> step_dynamics(const VehicleState<Scalar>& x, const ControlInput<Scalar>& u,
                                   Scalar dt) {
  if (!(dt > Scalar(0))) throw DomainError("step_dynamics: dt must be positive");
  if (!x.allFinite() || !u.allFinite()) throw DomainError("step_dynamics: non-finite input");
  VehicleState<Scalar> next;
  next(0) = x(0) + dt * x(2);
  next(1) = x(1) + dt * x(3);
  next(2) = x(2) + dt * u(0);
  next(3) = x(3) + dt * u(1);
  return next;
}

/// The explicit A and B matrices; used by tests as an independent route.
template <typename Scalar>
Eigen::Matrix<Scalar, 4, 4> transition_matrix(Scalar dt) {
  Eigen::Matrix<Scalar, 4, 4> a = Eigen::Matrix<Scalar, 4, 4>::Identity();
  a(0, 2) = dt;
  a(1, 3) = dt;
  return a;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 4, 2> input_matrix(Scalar dt) {
  Eigen::Matrix<Scalar, 4, 2> b = Eigen::Matrix<Scalar, 4, 2>::Zero();
  b(2, 0) = dt;
  b(3, 1) = dt;
  return b;
}

/// Rolls out one vehicle's control sequence (2T flat) from x0. Returns T+1 states.
template <typename Scalar, typename Derived>
StateTrajectory<Scalar> rollout_vehicle(const VehicleState<Scalar>& x0,
                                        const Eigen::MatrixBase<Derived>& sequence, Scalar dt) {
  const Eigen::Index horizon = sequence.size() / 2;
  StateTrajectory<Scalar> traj;
  traj.reserve(static_cast<std::size_t>(horizon) + 1);
  traj.push_back(x0);
  for (Eigen::Index tau = 0; tau < horizon; ++tau) {
    const ControlInput<Scalar> u = sequence.template segment<2>(2 * tau);
    traj.push_back(step_dynamics<Scalar>(traj.back(), u, dt));
  }
  return traj;
}

/// N x (T+1) predicted state grid.
template <typename Scalar>
std::vector<StateTrajectory<Scalar>> rollout(const std::vector<VehicleState<Scalar>>& x0_all,
                                             const JointProfile<Scalar>& profile, Scalar dt) {
  if (x0_all.size() != profile.n_vehicles()) {
    throw DomainError("rollout: " + std::to_string(x0_all.size()) + " initial states for " +
                      std::to_string(profile.n_vehicles()) + " control sequences");
  }
  std::vector<StateTrajectory<Scalar>> out;
  out.reserve(x0_all.size());
  for (std::size_t i = 0; i < x0_all.size(); ++i) {
    out.push_back(rollout_vehicle<Scalar>(x0_all[i], profile.sequence(i), dt));
  }
  return out;
}

template <typename Scalar>
ControlInput<Scalar> project_input(const ControlInput<Scalar>& u, Scalar u_max) {
  if (!u.allFinite()) throw DomainError("project_input: non-finite input");
  const Scalar norm = u.norm();
  if (norm <= u_max) return u;
  return u * (u_max / norm);
}

/// Projects every consecutive (ux, uy) pair of a flat vector onto the ball.
template <typename Scalar>
Vector<Scalar> project_flat(const Vector<Scalar>& flat, Scalar u_max) {
  if (flat.size() % 2 != 0) throw DomainError("project_flat: odd dimension");
  Vector<Scalar> out(flat.size());
  for (Eigen::Index k = 0; k < flat.size(); k += 2) {
    out.template segment<2>(k) = project_input<Scalar>(flat.template segment<2>(k), u_max);
  }
  return out;
}

template <typename Scalar>
bool is_feasible(const Vector<Scalar>& flat, Scalar u_max, Scalar slack = Scalar(0)) {
  for (Eigen::Index k = 0; k + 1 < flat.size(); k += 2) {
    if (!(flat.template segment<2>(k).norm() <= u_max + slack)) return false;
  }
  return true;
}

}  // namespace tdgame
