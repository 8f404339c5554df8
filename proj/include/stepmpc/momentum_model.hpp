#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace stepmpc {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Vector9d = Eigen::Matrix<double, 9, 1>;
using Vector12d = Eigen::Matrix<double, 12, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix9d = Eigen::Matrix<double, 9, 9>;
using Matrix9x12d = Eigen::Matrix<double, 9, 12>;

/// Cross-product matrix: skew(v) * y == v.cross(y).
inline Eigen::Matrix3d skew(const Eigen::Vector3d& v)
{
  Eigen::Matrix3d m;
  // clang-format off
  m <<     0.0, -v.z(),  v.y(),
         v.z(),    0.0, -v.x(),
        -v.y(),  v.x(),    0.0;
  // clang-format on
  return m;
}

/// Reduced centroidal state: CoM position, CoM velocity and angular momentum
/// taken about the CoM. Flattens to R^9 in that order.
struct MomentumState
{
  Eigen::Vector3d com_position = Eigen::Vector3d::Zero();
  Eigen::Vector3d com_velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular_momentum = Eigen::Vector3d::Zero();

  Vector9d to_vector() const
  {
    Vector9d v;
    v << com_position, com_velocity, angular_momentum;
    return v;
  }

  static MomentumState from_vector(const Vector9d& v)
  {
    return {v.segment<3>(0), v.segment<3>(3), v.segment<3>(6)};
  }
};

/// Contact wrench expressed at the contact point, force stacked before torque.
struct ContactWrench
{
  Eigen::Vector3d force = Eigen::Vector3d::Zero();
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();

  Vector6d to_vector() const
  {
    Vector6d v;
    v << force, torque;
    return v;
  }

  static ContactWrench from_vector(const Vector6d& v)
  {
    return {v.head<3>(), v.tail<3>()};
  }
};

/// Left/right wrench pair; flattens to R^12 with the left block first.
struct WrenchPair
{
  ContactWrench left;
  ContactWrench right;

  Vector12d to_vector() const
  {
    Vector12d v;
    v << left.to_vector(), right.to_vector();
    return v;
  }

  static WrenchPair from_vector(const Vector12d& v)
  {
    return {ContactWrench::from_vector(v.head<6>()),
            ContactWrench::from_vector(v.tail<6>())};
  }
};

/// Contact point placement and the constants of the reduced model.
struct ContactGeometry
{
  Eigen::Vector3d left_foot_position = Eigen::Vector3d::Zero();
  Eigen::Vector3d right_foot_position = Eigen::Vector3d::Zero();
  double mass = 30.0;
  double gravity = 9.81;
};

/// Wrench transport from a contact point to the CoM:
/// [f; tau_com] = adjoint * [f; tau], with tau_com = (p - c) x f + tau.
inline Matrix6d adjoint_transform(const Eigen::Vector3d& contact_position,
                                  const Eigen::Vector3d& com_position)
{
  Matrix6d x = Matrix6d::Identity();
  x.block<3, 3>(3, 0) = skew(contact_position - com_position);
  return x;
}

/// Exact (bilinear) momentum rate. This is the plant-side model; the
/// controller works with its Taylor expansion below.
inline Vector9d exact_momentum_rate(const MomentumState& state,
                                    const WrenchPair& wrenches,
                                    const ContactGeometry& geometry)
{
  Vector9d rate;
  rate.segment<3>(0) = state.com_velocity;
  rate.segment<3>(3) =
      (wrenches.left.force + wrenches.right.force) / geometry.mass +
      Eigen::Vector3d(0.0, 0.0, -geometry.gravity);
  rate.segment<3>(6) =
      (geometry.left_foot_position - state.com_position).cross(wrenches.left.force) +
      wrenches.left.torque +
      (geometry.right_foot_position - state.com_position).cross(wrenches.right.force) +
      wrenches.right.torque;
  return rate;
}

/// Continuous-time affine model
///   gamma_dot = ev_tilde * gamma + f_tilde * f + g_tilde + s0_tilde
/// obtained by expanding the bilinear angular-momentum term around an
/// expansion wrench f0 and expansion CoM position x0. Exact at the expansion
/// point; the remainder is the product of the two deviations, so it shrinks
/// quadratically when both are scaled together.
struct ContinuousAffineModel
{
  Matrix9d ev_tilde = Matrix9d::Zero();
  Matrix9x12d f_tilde = Matrix9x12d::Zero();
  Vector9d g_tilde = Vector9d::Zero();
  Vector9d s0_tilde = Vector9d::Zero();

  Eigen::Vector3d expansion_com = Eigen::Vector3d::Zero();
  WrenchPair expansion_wrench;

  Vector9d evaluate(const Vector9d& gamma, const Vector12d& f) const
  {
    return ev_tilde * gamma + f_tilde * f + g_tilde + s0_tilde;
  }
};

/// Taylor expansion of the momentum dynamics around (expansion_state CoM,
/// expansion_wrench). Foot positions are data, not decision variables.
inline ContinuousAffineModel linearize(const MomentumState& expansion_state,
                                       const WrenchPair& expansion_wrench,
                                       const ContactGeometry& geometry)
{
  ContinuousAffineModel model;
  model.expansion_com = expansion_state.com_position;
  model.expansion_wrench = expansion_wrench;

  const Eigen::Vector3d force_sum =
      expansion_wrench.left.force + expansion_wrench.right.force;
  const Eigen::Matrix3d eye = Eigen::Matrix3d::Identity();

  model.ev_tilde.block<3, 3>(0, 3) = eye;
  model.ev_tilde.block<3, 3>(6, 0) = skew(force_sum);

  model.f_tilde.block<3, 3>(3, 0) = eye / geometry.mass;
  model.f_tilde.block<3, 3>(3, 6) = eye / geometry.mass;
  model.f_tilde.block<3, 3>(6, 0) =
      skew(geometry.left_foot_position - model.expansion_com);
  model.f_tilde.block<3, 3>(6, 3) = eye;
  model.f_tilde.block<3, 3>(6, 6) =
      skew(geometry.right_foot_position - model.expansion_com);
  model.f_tilde.block<3, 3>(6, 9) = eye;

  model.g_tilde(5) = -geometry.gravity;

  model.s0_tilde.tail<3>() = -skew(force_sum) * model.expansion_com;
  return model;
}

/// One-step forward-Euler discretization of the affine model:
///   gamma(k+1) = ev * gamma(k) + f * f(k) + g + s0.
struct DiscreteModel
{
  Matrix9d ev = Matrix9d::Identity();
  Matrix9x12d f = Matrix9x12d::Zero();
  Vector9d g = Vector9d::Zero();
  Vector9d s0 = Vector9d::Zero();
  double dt = 0.0;

  Vector9d step(const Vector9d& gamma, const Vector12d& control) const
  {
    return ev * gamma + f * control + g + s0;
  }
};

inline DiscreteModel discretize(const ContinuousAffineModel& model, double dt)
{
  if (!(dt > 0.0))
  {
    throw std::invalid_argument("discretize: dt must be > 0");
  }
  DiscreteModel d;
  d.ev = Matrix9d::Identity() + dt * model.ev_tilde;
  d.f = dt * model.f_tilde;
  d.g = dt * model.g_tilde;
  d.s0 = dt * model.s0_tilde;
  d.dt = dt;
  return d;
}

}  // namespace stepmpc
