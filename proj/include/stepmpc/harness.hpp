#pragma once

#include <stepmpc/config.hpp>
#include <stepmpc/mpc_controller.hpp>
#include <stepmpc/simulation.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace stepmpc {

/// Static equilibrium command for the given contact configuration: weight
/// split evenly across the feet in contact, zero torque, zero tangentials.
inline WrenchPair equilibrium_command(double mass, double gravity, bool right_in_contact)
{
  const double weight = mass * gravity;
  WrenchPair wrench;
  if (right_in_contact)
  {
    wrench.left.force.z() = 0.5 * weight;
    wrench.right.force.z() = 0.5 * weight;
  }
  else
  {
    wrench.left.force.z() = weight;
  }
  return wrench;
}

/// One closed-loop tick as logged: controller inputs at the tick start, the
/// command it produced, and the plant's reaction by the tick end.
struct RunLogRow
{
  double time = 0.0;
  Vector9d state = Vector9d::Zero();         // at tick start
  Vector12d command = Vector12d::Zero();     // controller output this tick
  Vector12d realized = Vector12d::Zero();    // tracker output at tick end
  Eigen::Vector3d push = Eigen::Vector3d::Zero();
  Eigen::Vector3d right_foot_position = Eigen::Vector3d::Zero();  // tick end
  bool left_contact = true;
  bool right_contact = false;  // tick end
  SupportPhase phase = SupportPhase::single_support;
  int impact_stage = 0;
  bool trigger_fired = false;
  bool degraded = false;
  SolveStatus solve_status = SolveStatus::solved;
  int solve_iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool solution_polished = false;
  double solve_ms = 0.0;  // stays 0 unless timing was requested
};

struct RunSummary
{
  bool fell = false;
  double fall_time = std::numeric_limits<double>::quiet_NaN();
  bool step_taken = false;
  double trigger_time = std::numeric_limits<double>::quiet_NaN();
  double impact_time = std::numeric_limits<double>::quiet_NaN();

  double last_push_end = 0.0;
  /// First time after the last push such that the transverse CoM error stays
  /// within settle_radius of the final support centroid for the rest of the
  /// run; NaN when that never happens.
  double settle_time = std::numeric_limits<double>::quiet_NaN();
  double settle_radius = 0.02;

  Eigen::Vector2d final_support_centroid = Eigen::Vector2d::Zero();
  double final_transverse_error = 0.0;
  double max_transverse_error = 0.0;  // against the final centroid, post-push
  double min_com_height = 0.0;

  int ticks = 0;
  int degraded_ticks = 0;
  double median_solve_ms = 0.0;

  bool settled() const { return std::isfinite(settle_time); }
};

struct RunResult
{
  std::vector<RunLogRow> log;
  RunSummary summary;
};

namespace detail {

inline double median(std::vector<double> values)
{
  if (values.empty())
    return 0.0;
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

inline RunSummary summarize(const std::vector<RunLogRow>& log,
                            const ScenarioConfig& scenario, bool fell, double fall_time,
                            std::vector<double> solve_times_ms)
{
  RunSummary summary;
  summary.fell = fell;
  summary.fall_time = fall_time;
  summary.ticks = static_cast<int>(log.size());
  summary.median_solve_ms = median(std::move(solve_times_ms));
  if (log.empty())
    return summary;

  for (const auto& row : log)
  {
    if (row.trigger_fired && !summary.step_taken)
    {
      summary.step_taken = true;
      summary.trigger_time = row.time;
    }
    summary.degraded_ticks += row.degraded ? 1 : 0;
  }
  bool was_in_contact = scenario.robot.right_foot_in_contact;
  for (const auto& row : log)
  {
    if (!was_in_contact && row.right_contact && summary.step_taken)
    {
      summary.impact_time = row.time + scenario.controller.dt;
      break;
    }
    was_in_contact = row.right_contact;
  }

  for (const auto& push : scenario.simulation.pushes)
    summary.last_push_end =
        std::max(summary.last_push_end, push.start_time + push.duration);

  const RunLogRow& last = log.back();
  std::vector<Eigen::Vector3d> support_feet = {scenario.robot.left_foot_position};
  if (last.right_contact)
    support_feet.push_back(last.right_foot_position);
  summary.final_support_centroid =
      SupportPolygon::from_feet(support_feet, scenario.robot.foot).centroid();

  summary.min_com_height = std::numeric_limits<double>::infinity();
  for (const auto& row : log)
    summary.min_com_height = std::min(summary.min_com_height, row.state(2));

  auto transverse_error = [&](const RunLogRow& row) {
    return (row.state.head<2>() - summary.final_support_centroid).norm();
  };
  summary.final_transverse_error = transverse_error(last);

  // Scan backwards: the settle time is just after the last post-push sample
  // that exceeds the radius.
  double settle = std::numeric_limits<double>::quiet_NaN();
  bool any_post_push = false;
  for (size_t i = log.size(); i-- > 0;)
  {
    const RunLogRow& row = log[i];
    if (row.time < summary.last_push_end)
      break;
    any_post_push = true;
    const double error = transverse_error(row);
    summary.max_transverse_error = std::max(summary.max_transverse_error, error);
    if (error > summary.settle_radius)
    {
      settle = (i + 1 < log.size()) ? log[i + 1].time
                                    : std::numeric_limits<double>::quiet_NaN();
      break;
    }
    settle = row.time;
  }
  // Record the peak over the remaining post-push prefix as well.
  for (const auto& row : log)
  {
    if (row.time < summary.last_push_end)
      continue;
    summary.max_transverse_error =
        std::max(summary.max_transverse_error, transverse_error(row));
  }
  if (any_post_push && fell)
    settle = std::numeric_limits<double>::quiet_NaN();
  summary.settle_time = any_post_push ? settle : std::numeric_limits<double>::quiet_NaN();
  return summary;
}

}  // namespace detail

/// Runs the full closed loop described by the scenario: controller at the
/// start of every tick, plant integration across it, fall detection at its
/// end. Solve times are only measured (and logged) when the scenario's output
/// section asks for timing, so default runs stay byte-for-byte reproducible.
inline RunResult run_scenario(const ScenarioConfig& scenario)
{
  scenario.validate();
  const double swing_duration =
      scenario.controller.step_duration + scenario.simulation.impact_timing_error;
  if (!(swing_duration > 0.0))
    throw ConfigError(
        "simulation.impact_timing_error: swing duration "
        "(controller.step_duration + impact_timing_error) must be > 0");

  MpcController controller(controller_config(scenario));
  Plant plant(plant_params(scenario));
  plant.set_initial_wrench(equilibrium_command(scenario.robot.mass,
                                               scenario.robot.gravity,
                                               scenario.robot.right_foot_in_contact));

  const double dt = scenario.controller.dt;
  const int n_ticks =
      static_cast<int>(std::llround(scenario.simulation.duration / dt));

  RunResult result;
  result.log.reserve(static_cast<size_t>(std::max(n_ticks, 0)));
  std::vector<double> solve_times_ms;
  bool fell = false;
  double fall_time = std::numeric_limits<double>::quiet_NaN();

  for (int tick = 0; tick < n_ticks; ++tick)
  {
    const double t = static_cast<double>(tick) * dt;

    Feedback feedback;
    feedback.state = plant.state().momentum_state;
    feedback.realized_wrench = plant.realized_wrench();
    feedback.right_foot_in_contact = plant.state().right_contact;
    feedback.right_foot_position = plant.state().right_foot_position;

    RunLogRow row;
    row.time = t;
    row.state = feedback.state.to_vector();
    row.push = push_force_at(scenario.simulation.pushes, t);

    ControllerOutput output;
    if (scenario.output.timing)
    {
      const auto begin = std::chrono::steady_clock::now();
      output = controller.step(feedback);
      const auto end = std::chrono::steady_clock::now();
      row.solve_ms = std::chrono::duration<double, std::milli>(end - begin).count();
      solve_times_ms.push_back(row.solve_ms);
    }
    else
    {
      output = controller.step(feedback);
    }

    if (output.trigger_fired)
      plant.begin_swing(controller.stepping().swing_target, swing_duration);
    else if (plant.swing_active())
      plant.retarget_swing(controller.stepping().swing_target);

    plant.step(output.wrench_command, dt);

    row.command = output.wrench_command.to_vector();
    row.realized = plant.realized_wrench().to_vector();
    row.right_foot_position = plant.state().right_foot_position;
    row.left_contact = plant.state().left_contact;
    row.right_contact = plant.state().right_contact;
    row.phase = controller.stepping().phase;
    row.impact_stage = output.impact_stage;
    row.trigger_fired = output.trigger_fired;
    row.degraded = output.degraded;
    row.solve_status = output.solve_status;
    row.solve_iterations = output.solve_iterations;
    row.primal_residual = output.primal_residual;
    row.dual_residual = output.dual_residual;
    row.solution_polished = output.solution_polished;
    result.log.push_back(row);

    const auto& com = plant.state().momentum_state.com_position;
    if (!com.allFinite() || com.z() < scenario.simulation.fall_threshold)
    {
      fell = true;
      fall_time = t + dt;
      break;
    }
  }

  result.summary =
      detail::summarize(result.log, scenario, fell, fall_time, std::move(solve_times_ms));
  return result;
}

}  // namespace stepmpc
