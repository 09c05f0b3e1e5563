#pragma once

// Core value types for the planar multi-vehicle game. Every type is a thin
// Eigen alias or wrapper templated on the scalar, so the dynamics and cost
// code can be instantiated for double (production) or long double (tests).

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tdgame {

/// Thrown for precondition violations: bad dimensions, non-finite inputs,
/// out-of-range indices, invalid configuration values.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// (rx, ry, vx, vy) in m and m/s.
template <typename Scalar>
using VehicleState = Eigen::Matrix<Scalar, 4, 1>;

/// (ux, uy) acceleration in m/s^2.
template <typename Scalar>
using ControlInput = Eigen::Matrix<Scalar, 2, 1>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;
using State = VehicleState<double>;
using Input = ControlInput<double>;

/// Predicted states of one vehicle: entry 0 is the initial state, entry
/// tau + 1 the state after applying the tau-th control.
template <typename Scalar>
using StateTrajectory = std::vector<VehicleState<Scalar>>;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// Stacked control sequences of all vehicles over the horizon.
///
/// Flat layout is vehicle-major, then step, then (ux, uy): the control of
/// vehicle i at step tau lives at 2 * (i * T + tau).
template <typename Scalar>
class JointProfile {
 public:
  JointProfile() = default;

  JointProfile(std::size_t n_vehicles, std::size_t horizon)
      : n_vehicles_(n_vehicles),
        horizon_(horizon),
        flat_(Vector<Scalar>::Zero(static_cast<Eigen::Index>(2 * n_vehicles * horizon))) {}

  static JointProfile from_flat(std::size_t n_vehicles, std::size_t horizon,
                                const Vector<Scalar>& flat) {
    if (static_cast<std::size_t>(flat.size()) != 2 * n_vehicles * horizon) {
      throw DomainError("JointProfile::from_flat: expected " +
                        std::to_string(2 * n_vehicles * horizon) + " entries, got " +
                        std::to_string(flat.size()));
    }
    JointProfile p(n_vehicles, horizon);
    p.flat_ = flat;
    return p;
  }

  std::size_t n_vehicles() const { return n_vehicles_; }
  std::size_t horizon() const { return horizon_; }
  Eigen::Index dim() const { return flat_.size(); }
  Eigen::Index vehicle_dim() const { return static_cast<Eigen::Index>(2 * horizon_); }

  const Vector<Scalar>& flat() const { return flat_; }
  Vector<Scalar>& flat() { return flat_; }

  /// Control sequence of vehicle i as a 2T segment view.
  auto sequence(std::size_t i) { return flat_.segment(offset(i), vehicle_dim()); }
  auto sequence(std::size_t i) const { return flat_.segment(offset(i), vehicle_dim()); }

  auto input(std::size_t i, std::size_t tau) { return flat_.template segment<2>(offset(i) + 2 * static_cast<Eigen::Index>(tau)); }
  auto input(std::size_t i, std::size_t tau) const {
    return flat_.template segment<2>(offset(i) + 2 * static_cast<Eigen::Index>(tau));
  }

  Eigen::Index offset(std::size_t i) const { return static_cast<Eigen::Index>(i) * vehicle_dim(); }

  bool operator==(const JointProfile& other) const {
    return n_vehicles_ == other.n_vehicles_ && horizon_ == other.horizon_ && flat_ == other.flat_;
  }

 private:
  std::size_t n_vehicles_ = 0;
  std::size_t horizon_ = 0;
  Vector<Scalar> flat_;
};

using Profile = JointProfile<double>;

}  // namespace tdgame
