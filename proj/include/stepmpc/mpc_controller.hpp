#pragma once

#include <stepmpc/contact_constraints.hpp>
#include <stepmpc/cost_builder.hpp>
#include <stepmpc/momentum_model.hpp>
#include <stepmpc/qp_solver.hpp>
#include <stepmpc/qp_transcription.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace stepmpc {

/// Where the contact sequence currently stands. The left foot is the stance
/// limb throughout; only the right foot ever swings.
enum class SupportPhase
{
  double_support,   // both feet down, no step history
  single_support,   // left foot only, no step planned yet
  swing,            // step planned, right foot in flight
  post_step,        // right foot landed after a step
};

inline const char* to_string(SupportPhase phase)
{
  switch (phase)
  {
    case SupportPhase::double_support: return "double_support";
    case SupportPhase::single_support: return "single_support";
    case SupportPhase::swing: return "swing";
    case SupportPhase::post_step: return "post_step";
  }
  return "unknown";
}

struct SteppingState
{
  SupportPhase phase = SupportPhase::single_support;
  int impact_index = 0;                 // countdown to touchdown, swing phase only
  double planned_impact_time = 0.0;     // swing duration set by plan_step
  Eigen::Vector3d swing_target = Eigen::Vector3d::Zero();
  bool step_taken = false;              // one recovery step per run
};

/// Impact-stage countdown. While the swing foot is in flight the index
/// decrements once per cycle but saturates at 1, absorbing timing error in
/// the touchdown estimate; the measured contact alone moves it to 0, and 0
/// means both feet are load-bearing.
inline int update_impact_index(int current, bool contact_established)
{
  if (contact_established)
    return 0;
  return std::max(current - 1, 1);
}

/// Capture-point trigger: step when
///   x_cp = x_xy + v_xy * sqrt(h / g)
/// leaves the support polygon grown by `margin` (negative margin shrinks it).
inline bool step_trigger(const MomentumState& state, const SupportPolygon& support,
                         double com_height, double gravity, double margin)
{
  if (!(com_height > 0.0) || !(gravity > 0.0))
    throw std::invalid_argument("step_trigger: com_height and gravity must be > 0");
  const Eigen::Vector2d capture_point =
      state.com_position.head<2>() +
      state.com_velocity.head<2>() * std::sqrt(com_height / gravity);
  return support.signed_distance(capture_point) > margin;
}

struct StepPlan
{
  Eigen::Vector3d swing_target = Eigen::Vector3d::Zero();
  double t_impact = 0.0;
};

/// Places the swing target at the capture point predicted for touchdown,
/// clamped into the kinematic reach disc around the stance foot, on the
/// ground plane. `horizon_time` is the time remaining until touchdown (the
/// full step duration when planning at the trigger); the returned t_impact is
/// always the configured step duration.
///
/// Prediction model: the stance foot can hold the center of pressure
/// anywhere inside its own patch, so the recoverable part of the capture
/// point offset is the part the patch can cover. Relative to the best stance
/// CoP p* (the capture point clamped into the patch), the capture point
/// diverges exponentially with rate omega = sqrt(g/h):
///   xi(T) = p* + exp(omega T) (xi(0) - p*).
/// A foot placed at the instantaneous capture point would land far behind the
/// state it was meant to catch.
///
/// `capture_gain` scales the predicted overshoot beyond p*: with gain 1 the
/// foot lands exactly on the predicted capture point; gains > 1 land it
/// farther out, which buys margin for the weight transfer after touchdown
/// (the new foot can only hold the capture point once it carries enough
/// load, and the capture point keeps drifting while load shifts).
inline StepPlan plan_step(const MomentumState& state,
                          const Eigen::Vector3d& stance_foot_position,
                          const FootParams& foot, double com_height, double gravity,
                          double reach_radius, double step_duration,
                          double horizon_time, double capture_gain = 1.0)
{
  if (!(reach_radius > 0.0) || !(step_duration > 0.0))
    throw std::invalid_argument("plan_step: reach_radius and step_duration must be > 0");
  if (horizon_time < 0.0)
    throw std::invalid_argument("plan_step: horizon_time must be >= 0");
  if (!(capture_gain > 0.0))
    throw std::invalid_argument("plan_step: capture_gain must be > 0");
  const double omega = std::sqrt(gravity / com_height);
  const Eigen::Vector2d capture_point =
      state.com_position.head<2>() + state.com_velocity.head<2>() / omega;
  const Eigen::Vector2d stance_xy = stance_foot_position.head<2>();

  const Eigen::Vector2d best_cop(
      std::clamp(capture_point.x(), stance_xy.x() - foot.half_length,
                 stance_xy.x() + foot.half_length),
      std::clamp(capture_point.y(), stance_xy.y() - foot.half_width,
                 stance_xy.y() + foot.half_width));
  const Eigen::Vector2d predicted =
      best_cop +
      capture_gain * std::exp(omega * horizon_time) * (capture_point - best_cop);

  Eigen::Vector2d offset = predicted - stance_xy;
  const double reach = offset.norm();
  if (reach > reach_radius)
    offset *= reach_radius / reach;
  StepPlan plan;
  plan.swing_target << stance_xy + offset, 0.0;
  plan.t_impact = step_duration;
  return plan;
}

/// Everything the controller needs to observe each cycle.
struct Feedback
{
  MomentumState state;
  WrenchPair realized_wrench;
  bool right_foot_in_contact = false;
  Eigen::Vector3d right_foot_position = Eigen::Vector3d::Zero();
};

struct ControllerOutput
{
  WrenchPair wrench_command;
  std::vector<Vector9d> predicted_states;     // gamma(1..N)
  std::vector<Vector12d> predicted_controls;  // f(0..N-1)
  SolveStatus solve_status = SolveStatus::solved;
  int solve_iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool solution_polished = false;
  bool degraded = false;       // iteration cap hit, or command held
  bool trigger_fired = false;  // step decision made this cycle
  int impact_stage = 0;        // stage bound used for the swing constraints
};

struct ControllerConfig
{
  double dt = 0.01;
  int horizon = 25;
  double mass = 30.0;
  double gravity = 9.81;
  Eigen::Vector3d left_foot_position = Eigen::Vector3d::Zero();
  double com_height_ref = 0.53;

  CostWeights weights = CostWeights::defaults();
  FootParams foot;
  SolverSettings solver = default_solver_settings();

  double trigger_margin = 0.02;  // polygon inflation before the trigger fires
  double step_duration = 0.6;
  double reach_radius = 0.35;
  /// Fraction of the swing during which the touchdown target may still be
  /// refreshed from live state (0 freezes it at the trigger).
  double retarget_fraction = 0.5;
  /// Overshoot applied to the predicted capture-point offset (see plan_step).
  double capture_gain = 1.0;

  /// The in-loop tolerance is moderate — final accuracy comes from the
  /// active-set polish step, which lands machine-precision KKT points when it
  /// succeeds (in particular pinning swing-foot wrench commands to zero).
  /// The ADMM iterations only need to get close enough for the right active
  /// set.
  static SolverSettings default_solver_settings()
  {
    SolverSettings s;
    s.abs_tolerance = 1e-5;
    s.rel_tolerance = 1e-5;
    return s;
  }

  void validate() const
  {
    if (!(dt > 0.0))
      throw std::invalid_argument("ControllerConfig: dt must be > 0");
    if (horizon < 1)
      throw std::invalid_argument("ControllerConfig: horizon must be >= 1");
    if (!(mass > 0.0) || !(gravity > 0.0))
      throw std::invalid_argument("ControllerConfig: mass and gravity must be > 0");
    if (!(com_height_ref > 0.0))
      throw std::invalid_argument("ControllerConfig: com_height_ref must be > 0");
    if (!(step_duration > 0.0) || !(reach_radius > 0.0))
      throw std::invalid_argument(
          "ControllerConfig: step_duration and reach_radius must be > 0");
    if (retarget_fraction < 0.0 || retarget_fraction > 1.0)
      throw std::invalid_argument(
          "ControllerConfig: retarget_fraction must be within [0, 1]");
    if (!(capture_gain > 0.0))
      throw std::invalid_argument("ControllerConfig: capture_gain must be > 0");
    weights.validate();
    foot.validate();
  }
};

/// Receding-horizon momentum controller with reactive stepping.
///
/// Each cycle: advance the impact countdown, decide whether a step has to be
/// taken, re-linearize the dynamics around the measured state and realized
/// wrench, transcribe the horizon into a sparse QP, solve warm-started, and
/// emit the first control. The previous command is held if the solver
/// reports infeasibility.
class MpcController
{
public:
  explicit MpcController(const ControllerConfig& config)
      : config_(config), layout_(config.horizon), solver_(config.solver)
  {
    config_.validate();
    stance_block_ = stance_block(config_.foot);
  }

  const ControllerConfig& config() const { return config_; }
  const SteppingState& stepping() const { return stepping_; }

  ControllerOutput step(const Feedback& feedback)
  {
    if (!initialized_)
      initialize(feedback);

    ControllerOutput output;
    advance_stepping(feedback, output);

    const int impact_stage = effective_impact_stage();
    output.impact_stage = impact_stage;

    ContactGeometry geometry;
    geometry.mass = config_.mass;
    geometry.gravity = config_.gravity;
    geometry.left_foot_position = config_.left_foot_position;
    geometry.right_foot_position = stepping_.phase == SupportPhase::swing
                                       ? stepping_.swing_target
                                       : feedback.right_foot_position;

    const DiscreteModel model =
        discretize(linearize(feedback.state, feedback.realized_wrench, geometry),
                   config_.dt);

    const ReferenceTrajectory references =
        build_references(feedback.state, reference_centroid(feedback),
                         config_.com_height_ref, layout_.n_stages);

    const QpProblem qp = assemble_qp(model, feedback.state.to_vector(), stance_block_,
                                     stance_block_, impact_stage, config_.foot,
                                     config_.weights, references, f_prev_, layout_);

    const QpSolution solution = solver_.solve(qp, shifted_warm_start());
    output.solve_status = solution.status;
    output.solve_iterations = solution.iterations;
    output.primal_residual = solution.primal_residual;
    output.dual_residual = solution.dual_residual;
    output.solution_polished = solution.polished;

    if (solution.status == SolveStatus::primal_infeasible)
    {
      output.wrench_command = WrenchPair::from_vector(f_prev_);
      output.degraded = true;
      return output;
    }

    const HorizonTrajectory plan = unpack_chi(solution.primal, layout_);
    output.predicted_states = plan.states;
    output.predicted_controls = plan.controls;
    output.wrench_command = WrenchPair::from_vector(plan.controls.front());
    output.degraded = solution.status == SolveStatus::max_iterations;

    f_prev_ = plan.controls.front();
    previous_solution_ = solution;
    return output;
  }

private:
  void initialize(const Feedback& feedback)
  {
    stepping_.phase = feedback.right_foot_in_contact ? SupportPhase::double_support
                                                     : SupportPhase::single_support;
    const double weight = config_.mass * config_.gravity;
    WrenchPair equilibrium;
    if (feedback.right_foot_in_contact)
    {
      equilibrium.left.force.z() = 0.5 * weight;
      equilibrium.right.force.z() = 0.5 * weight;
    }
    else
    {
      equilibrium.left.force.z() = weight;
    }
    f_prev_ = equilibrium.to_vector();
    initialized_ = true;
  }

  void advance_stepping(const Feedback& feedback, ControllerOutput& output)
  {
    switch (stepping_.phase)
    {
      case SupportPhase::swing:
        stepping_.impact_index =
            update_impact_index(stepping_.impact_index, feedback.right_foot_in_contact);
        if (feedback.right_foot_in_contact)
        {
          stepping_.phase = SupportPhase::post_step;
          break;
        }
        // Refresh the touchdown target early in the swing: a push that is
        // still acting when the step is planned keeps moving the capture
        // point, and a target frozen at the trigger lands the foot short.
        {
          const double remaining = stepping_.impact_index * config_.dt;
          if (remaining >
              (1.0 - config_.retarget_fraction) * stepping_.planned_impact_time)
          {
            const double height = std::max(feedback.state.com_position.z(), 1e-3);
            const StepPlan plan = plan_step(
                feedback.state, config_.left_foot_position, config_.foot, height,
                config_.gravity, config_.reach_radius, config_.step_duration,
                remaining, config_.capture_gain);
            stepping_.swing_target = plan.swing_target;
          }
        }
        break;
      case SupportPhase::single_support:
        if (!stepping_.step_taken)
        {
          const SupportPolygon support = SupportPolygon::from_feet(
              {config_.left_foot_position}, config_.foot);
          const double height = std::max(feedback.state.com_position.z(), 1e-3);
          if (step_trigger(feedback.state, support, height, config_.gravity,
                           config_.trigger_margin))
          {
            const StepPlan plan =
                plan_step(feedback.state, config_.left_foot_position, config_.foot,
                          height, config_.gravity, config_.reach_radius,
                          config_.step_duration, config_.step_duration,
                          config_.capture_gain);
            stepping_.phase = SupportPhase::swing;
            stepping_.swing_target = plan.swing_target;
            stepping_.planned_impact_time = plan.t_impact;
            stepping_.impact_index =
                static_cast<int>(std::ceil(plan.t_impact / config_.dt));
            stepping_.step_taken = true;
            output.trigger_fired = true;
          }
        }
        break;
      case SupportPhase::double_support:
      case SupportPhase::post_step:
        break;
    }
  }

  /// Stage index before which the right foot carries no load. Idle single
  /// support maps past the horizon (every stage unloaded); a landed or
  /// initially planted foot maps to 0 (every stage loaded).
  int effective_impact_stage() const
  {
    switch (stepping_.phase)
    {
      case SupportPhase::single_support:
        return layout_.n_stages + 1;
      case SupportPhase::swing:
        return stepping_.impact_index;
      case SupportPhase::double_support:
      case SupportPhase::post_step:
        return 0;
    }
    return 0;
  }

  Eigen::Vector2d reference_centroid(const Feedback& feedback) const
  {
    std::vector<Eigen::Vector3d> feet{config_.left_foot_position};
    switch (stepping_.phase)
    {
      case SupportPhase::single_support:
        break;
      case SupportPhase::swing:
        feet.push_back(stepping_.swing_target);
        break;
      case SupportPhase::double_support:
      case SupportPhase::post_step:
        feet.push_back(feedback.right_foot_position);
        break;
    }
    return SupportPolygon::from_feet(feet, config_.foot).centroid();
  }

  /// Previous solution shifted one stage forward, last stage repeated.
  std::optional<QpSolution> shifted_warm_start() const
  {
    if (!previous_solution_)
      return std::nullopt;
    const QpSolution& prev = *previous_solution_;
    QpSolution warm = prev;

    const int n = layout_.n_stages;
    const int block = ChiLayout::block_dim;
    for (int k = 0; k + 1 < n; ++k)
      warm.primal.segment(block * k, block) = prev.primal.segment(block * (k + 1), block);

    const int eq_block = ChiLayout::state_dim;
    for (int k = 0; k + 1 < n; ++k)
      warm.dual_eq.segment(eq_block * k, eq_block) =
          prev.dual_eq.segment(eq_block * (k + 1), eq_block);

    const int ineq_block = static_cast<int>(prev.dual_ineq.size()) / n;
    for (int k = 0; k + 1 < n; ++k)
      warm.dual_ineq.segment(ineq_block * k, ineq_block) =
          prev.dual_ineq.segment(ineq_block * (k + 1), ineq_block);
    return warm;
  }

  ControllerConfig config_;
  ChiLayout layout_;
  AdmmQpSolver solver_;
  StanceConstraintBlock stance_block_;
  SteppingState stepping_;
  Vector12d f_prev_ = Vector12d::Zero();
  std::optional<QpSolution> previous_solution_;
  bool initialized_ = false;
};

}  // namespace stepmpc
