#pragma once

#include <stepmpc/momentum_model.hpp>

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace stepmpc {

/// Classic fixed-step fourth-order Runge-Kutta update for y' = f(t, y).
template <typename State, typename Derivative>
State rk4_step(const Derivative& f, double t, const State& y, double dt)
{
  const State k1 = f(t, y);
  const State k2 = f(t + 0.5 * dt, State(y + 0.5 * dt * k1));
  const State k3 = f(t + 0.5 * dt, State(y + 0.5 * dt * k2));
  const State k4 = f(t + dt, State(y + dt * k3));
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Finite-duration external force pulse applied at the CoM. The angle is
/// measured in the transverse plane from the lateral axis (pointing to the
/// robot's right, -y), rotating toward the frontal axis (+x): 0 pushes the
/// robot sideways, 90 pushes it forward.
struct PushEvent
{
  double start_time = 0.0;
  double duration = 0.1;
  double magnitude = 0.0;  // Newtons
  double angle_deg = 0.0;

  Eigen::Vector3d direction() const
  {
    const double a = angle_deg * M_PI / 180.0;
    return {std::sin(a), -std::cos(a), 0.0};
  }
};

inline Eigen::Vector3d push_force_at(const std::vector<PushEvent>& pushes, double t)
{
  Eigen::Vector3d force = Eigen::Vector3d::Zero();
  for (const auto& push : pushes)
    if (t >= push.start_time && t < push.start_time + push.duration)
      force += push.magnitude * push.direction();
  return force;
}

/// Imperfect wrench tracking: first-order lag toward the command plus
/// optional per-axis Gaussian noise, resampled once per control tick.
/// time_constant == 0 reproduces the command exactly.
struct WrenchTrackerModel
{
  double time_constant = 0.0;  // seconds
  double noise_std = 0.0;      // N on forces, N*m on torques
};

struct PlantState
{
  MomentumState momentum_state;
  Eigen::Vector3d right_foot_position = Eigen::Vector3d::Zero();
  bool left_contact = true;
  bool right_contact = false;
  double time = 0.0;
};

/// Ground-truth simulator. Integrates the exact bilinear momentum dynamics
/// with RK4, owns the wrench tracker and the swing-foot trajectory, and
/// zeroes the swing foot's wrench until touchdown regardless of the command.
class Plant
{
public:
  struct Params
  {
    ContactGeometry geometry;
    MomentumState initial_state;
    bool right_foot_in_contact = false;
    WrenchTrackerModel tracker;
    std::uint64_t seed = 1;
    std::vector<PushEvent> pushes;
    Eigen::Vector3d push_lever_arm = Eigen::Vector3d::Zero();
    double swing_apex = 0.03;
  };

  struct RkStageRecord
  {
    double t = 0.0;
    Vector9d gamma = Vector9d::Zero();
    Vector9d rate = Vector9d::Zero();
    WrenchPair wrench;
    Eigen::Vector3d push = Eigen::Vector3d::Zero();
  };

  explicit Plant(const Params& params)
      : params_(params), rng_(params.seed), noise_(0.0, 1.0)
  {
    state_.momentum_state = params.initial_state;
    state_.right_foot_position = params.geometry.right_foot_position;
    state_.right_contact = params.right_foot_in_contact;
    realized_ = Vector12d::Zero();
  }

  const PlantState& state() const { return state_; }

  WrenchPair realized_wrench() const { return WrenchPair::from_vector(masked(realized_)); }

  /// Preloads the tracker so the first feedback sample reports this wrench.
  void set_initial_wrench(const WrenchPair& wrench) { realized_ = wrench.to_vector(); }

  void begin_swing(const Eigen::Vector3d& target, double duration)
  {
    if (state_.right_contact)
      throw std::logic_error("Plant::begin_swing: right foot already in contact");
    if (!(duration > 0.0))
      throw std::invalid_argument("Plant::begin_swing: duration must be > 0");
    swing_active_ = true;
    swing_clock_ = 0.0;
    swing_duration_ = duration;
    swing_liftoff_ = state_.right_foot_position;
    swing_target_ = target;
  }

  /// Redirects an in-flight swing toward a new touchdown target while keeping
  /// the foot position continuous: the liftoff point is rebased so the
  /// remaining trajectory is the tail of a full minimum-jerk swing that ends
  /// at the new target. Calls late in the swing (blend past 99 %) are ignored
  /// because the foot can no longer move meaningfully before touchdown.
  void retarget_swing(const Eigen::Vector3d& new_target)
  {
    if (!swing_active_)
      throw std::logic_error("Plant::retarget_swing: no swing in flight");
    const double phase = swing_clock_ / swing_duration_;
    const double s = ((6.0 * phase - 15.0) * phase + 10.0) * phase * phase * phase;
    if (s > 0.99)
      return;
    const Eigen::Vector2d current =
        swing_liftoff_.head<2>() + s * (swing_target_.head<2>() - swing_liftoff_.head<2>());
    swing_liftoff_.head<2>() = (current - s * new_target.head<2>()) / (1.0 - s);
    swing_target_.head<2>() = new_target.head<2>();
  }

  bool swing_active() const { return swing_active_; }

  /// Advances one control tick under a zero-order-hold command.
  const PlantState& step(const WrenchPair& commanded, double dt)
  {
    if (!(dt > 0.0))
      throw std::invalid_argument("Plant::step: dt must be > 0");

    const Vector12d command = commanded.to_vector();
    const Vector12d lag_start = realized_;
    Vector12d noise = Vector12d::Zero();
    if (params_.tracker.noise_std > 0.0)
      for (int i = 0; i < 12; ++i)
        noise(i) = params_.tracker.noise_std * noise_(rng_);

    const double tau = params_.tracker.time_constant;
    const auto realized_at = [&](double s) -> Vector12d {
      if (tau <= 0.0)
        return command + noise;
      return command + std::exp(-s / tau) * (lag_start - command) + noise;
    };

    ContactGeometry geometry = params_.geometry;
    geometry.right_foot_position = state_.right_foot_position;

    int stage = 0;
    const auto rate = [&](double t_local, const Vector9d& gamma) -> Vector9d {
      const WrenchPair wrench = WrenchPair::from_vector(masked(realized_at(t_local)));
      const Eigen::Vector3d push = push_force_at(params_.pushes, state_.time + t_local);
      const MomentumState s = MomentumState::from_vector(gamma);
      Vector9d r = exact_momentum_rate(s, wrench, geometry);
      r.segment<3>(3) += push / geometry.mass;
      r.segment<3>(6) += params_.push_lever_arm.cross(push);
      if (stage < 4)
        stages_[static_cast<size_t>(stage)] = {t_local, gamma, r, wrench, push};
      ++stage;
      return r;
    };

    state_.momentum_state = MomentumState::from_vector(
        rk4_step(rate, 0.0, state_.momentum_state.to_vector(), dt));
    realized_ = realized_at(dt);

    if (swing_active_)
    {
      swing_clock_ += dt;
      if (swing_clock_ >= swing_duration_)
      {
        state_.right_foot_position = swing_target_;
        state_.right_foot_position.z() = 0.0;
        state_.right_contact = true;
        swing_active_ = false;
      }
      else
      {
        state_.right_foot_position =
            swing_position(swing_clock_ / swing_duration_);
      }
    }

    state_.time += dt;
    return state_;
  }

  /// Derivative evaluations of the most recent step, in stage order.
  const std::array<RkStageRecord, 4>& last_stages() const { return stages_; }

  const ContactGeometry& geometry() const { return params_.geometry; }

private:
  /// Swing foot wrenches cannot exist before touchdown.
  Vector12d masked(const Vector12d& wrench) const
  {
    Vector12d w = wrench;
    if (!state_.left_contact)
      w.head<6>().setZero();
    if (!state_.right_contact)
      w.tail<6>().setZero();
    return w;
  }

  /// Minimum-jerk transverse interpolation with a sinusoidal apex bump.
  Eigen::Vector3d swing_position(double phase) const
  {
    const double s = ((6.0 * phase - 15.0) * phase + 10.0) * phase * phase * phase;
    Eigen::Vector3d p;
    p.head<2>() =
        swing_liftoff_.head<2>() + s * (swing_target_.head<2>() - swing_liftoff_.head<2>());
    p.z() = (1.0 - s) * swing_liftoff_.z() + params_.swing_apex * std::sin(M_PI * s);
    return p;
  }

  Params params_;
  PlantState state_;
  Vector12d realized_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_;

  bool swing_active_ = false;
  double swing_clock_ = 0.0;
  double swing_duration_ = 0.0;
  Eigen::Vector3d swing_liftoff_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d swing_target_ = Eigen::Vector3d::Zero();

  mutable std::array<RkStageRecord, 4> stages_{};
};

}  // namespace stepmpc
