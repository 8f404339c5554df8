// Command-line front end: run a scenario, sweep push magnitudes, or validate
// a configuration file.
//
// Exit codes: 0 success, 1 the robot fell, 2 configuration error,
//             3 solver failure (a cycle reported primal infeasibility).

#include <stepmpc/stepmpc.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFell = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

struct Overrides
{
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<int> horizon;
  std::optional<double> duration;
  bool timing = false;
  bool no_plots = false;
};

void apply_overrides(stepmpc::ScenarioConfig& config, const Overrides& overrides)
{
  if (overrides.out_dir)
    config.output.directory = *overrides.out_dir;
  if (overrides.seed)
    config.simulation.seed = *overrides.seed;
  if (overrides.dt)
    config.controller.dt = *overrides.dt;
  if (overrides.horizon)
    config.controller.horizon = *overrides.horizon;
  if (overrides.duration)
    config.simulation.duration = *overrides.duration;
  if (overrides.timing)
    config.output.timing = true;
  if (overrides.no_plots)
    config.output.plots = false;
}

std::string format_time(double value)
{
  if (!std::isfinite(value))
    return "-";
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.3f s", value);
  return buffer;
}

/// The QP the controller would assemble on its very first cycle, written out
/// for offline inspection.
void dump_first_qp(const stepmpc::ScenarioConfig& scenario, const std::string& path)
{
  using namespace stepmpc;
  const ControllerConfig cc = controller_config(scenario);
  const Plant::Params pp = plant_params(scenario);

  const WrenchPair equilibrium = equilibrium_command(
      scenario.robot.mass, scenario.robot.gravity, scenario.robot.right_foot_in_contact);

  ContactGeometry geometry = pp.geometry;
  const ContinuousAffineModel continuous =
      linearize(pp.initial_state, equilibrium, geometry);
  const DiscreteModel model = discretize(continuous, cc.dt);

  std::vector<Eigen::Vector3d> feet = {cc.left_foot_position};
  if (scenario.robot.right_foot_in_contact)
    feet.push_back(scenario.robot.right_foot_position);
  const Eigen::Vector2d centroid =
      SupportPolygon::from_feet(feet, cc.foot).centroid();

  const ChiLayout layout(cc.horizon);
  const int impact_stage =
      scenario.robot.right_foot_in_contact ? 0 : cc.horizon + 1;
  const ReferenceTrajectory references =
      build_references(pp.initial_state, centroid, cc.com_height_ref, cc.horizon);
  const StanceConstraintBlock block = stance_block(cc.foot);

  const QpProblem qp =
      assemble_qp(model, pp.initial_state.to_vector(), block, block, impact_stage,
                  cc.foot, cc.weights, references, equilibrium.to_vector(), layout);
  dump_problem(qp, path);
}

int exit_code_for(const stepmpc::RunResult& result)
{
  if (result.summary.fell)
    return kExitFell;
  for (const auto& row : result.log)
    if (row.solve_status == stepmpc::SolveStatus::primal_infeasible)
      return kExitSolver;
  return kExitOk;
}

/// Runs one scenario and writes its artifacts. Returns the process exit code.
int run_one(const stepmpc::ScenarioConfig& scenario, bool dump_qp, bool quiet = false)
{
  using namespace stepmpc;
  fs::create_directories(scenario.output.directory);

  if (dump_qp)
    dump_first_qp(scenario, scenario.output.directory + "/qp_dump.txt");

  const RunResult result = run_scenario(scenario);

  write_csv(result.log, scenario.output.directory + "/log.csv");
  write_summary(result.summary, scenario.output.directory + "/summary.json");
  save_config(scenario, scenario.output.directory + "/config_resolved.json");
  if (scenario.output.plots)
    write_plots(result, scenario, scenario.output.directory);

  if (!quiet)
  {
    const RunSummary& s = result.summary;
    std::cout << "ticks:            " << s.ticks << "\n"
              << "fell:             " << (s.fell ? "yes" : "no");
    if (s.fell)
      std::cout << " (at " << format_time(s.fall_time) << ")";
    std::cout << "\n"
              << "step taken:       " << (s.step_taken ? "yes" : "no") << "\n"
              << "trigger time:     " << format_time(s.trigger_time) << "\n"
              << "impact time:      " << format_time(s.impact_time) << "\n"
              << "settle time:      " << format_time(s.settle_time) << "\n"
              << "max error:        " << s.max_transverse_error << " m\n"
              << "final error:      " << s.final_transverse_error << " m\n"
              << "degraded ticks:   " << s.degraded_ticks << "\n";
    if (scenario.output.timing)
      std::cout << "median solve:     " << s.median_solve_ms << " ms\n";
    std::cout << "outputs:          " << scenario.output.directory << "/\n";
  }
  return exit_code_for(result);
}

int run_sweep(const stepmpc::ScenarioConfig& base, const std::vector<double>& magnitudes)
{
  using namespace stepmpc;
  if (base.simulation.pushes.empty())
  {
    std::cerr << "sweep: the scenario defines no push events to scale\n";
    return kExitConfig;
  }
  fs::create_directories(base.output.directory);

  struct SweepRow
  {
    double magnitude = 0.0;
    RunResult result;
    int code = kExitOk;
  };

  std::vector<std::future<SweepRow>> futures;
  futures.reserve(magnitudes.size());
  for (double magnitude : magnitudes)
  {
    futures.push_back(std::async(std::launch::async, [&base, magnitude]() {
      ScenarioConfig scenario = base;
      for (auto& push : scenario.simulation.pushes)
        push.magnitude = magnitude;
      char name[64];
      std::snprintf(name, sizeof(name), "%s/push_%g", base.output.directory.c_str(),
                    magnitude);
      scenario.output.directory = name;
      SweepRow row;
      row.magnitude = magnitude;
      fs::create_directories(scenario.output.directory);
      row.result = run_scenario(scenario);
      write_csv(row.result.log, scenario.output.directory + "/log.csv");
      write_summary(row.result.summary, scenario.output.directory + "/summary.json");
      if (scenario.output.plots)
        write_plots(row.result, scenario, scenario.output.directory);
      row.code = exit_code_for(row.result);
      return row;
    }));
  }

  std::ofstream table(base.output.directory + "/sweep.csv", std::ios::binary);
  table << "magnitude,fell,step_taken,trigger_time,settle_time,"
           "max_transverse_error,final_transverse_error,degraded_ticks\n";
  int worst = kExitOk;
  for (auto& future : futures)
  {
    const SweepRow row = future.get();
    const RunSummary& s = row.result.summary;
    table << stepmpc::detail::format_number(row.magnitude) << ','
          << (s.fell ? 1 : 0) << ',' << (s.step_taken ? 1 : 0) << ','
          << stepmpc::detail::format_number(s.trigger_time) << ','
          << stepmpc::detail::format_number(s.settle_time) << ','
          << stepmpc::detail::format_number(s.max_transverse_error) << ','
          << stepmpc::detail::format_number(s.final_transverse_error) << ','
          << s.degraded_ticks << '\n';
    std::cout << "push " << row.magnitude << " N: " << (s.fell ? "fell" : "ok")
              << (s.step_taken ? ", stepped" : ", no step")
              << ", settle " << format_time(s.settle_time) << "\n";
    // A fall during a sweep is a data point, not a tool failure; only solver
    // breakdowns propagate.
    if (row.code == kExitSolver)
      worst = kExitSolver;
  }
  std::cout << "sweep table:      " << base.output.directory << "/sweep.csv\n";
  return worst;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Momentum-MPC push-recovery simulator"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;
  bool dump_qp = false;
  std::vector<double> magnitudes;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "scenario configuration (JSON, comments ok)")
        ->required();
    cmd->add_option("--out-dir", overrides.out_dir, "output directory override");
    cmd->add_option("--seed", overrides.seed, "noise seed override");
    cmd->add_option("--dt", overrides.dt, "controller/simulation step override [s]");
    cmd->add_option("--horizon", overrides.horizon, "prediction horizon override");
    cmd->add_option("--duration", overrides.duration, "simulation duration override [s]");
    cmd->add_flag("--timing", overrides.timing,
                  "measure and log wall-clock solve times (breaks byte-level "
                  "reproducibility of log.csv)");
    cmd->add_flag("--no-plots", overrides.no_plots, "skip SVG plot generation");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "simulate one scenario");
  add_common(run_cmd);
  run_cmd->add_flag("--dump-qp", dump_qp,
                    "write the first control cycle's QP matrices to qp_dump.txt");

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "re-run the scenario across push magnitudes");
  add_common(sweep_cmd);
  sweep_cmd
      ->add_option("--push-magnitudes", magnitudes,
                   "push magnitudes [N], comma separated")
      ->required()
      ->delimiter(',');

  CLI::App* check_cmd =
      app.add_subcommand("check", "validate a configuration and print it resolved");
  check_cmd->add_option("config", config_path, "scenario configuration")->required();

  CLI11_PARSE(app, argc, argv);

  try
  {
    stepmpc::ScenarioConfig scenario = stepmpc::load_config(config_path);
    apply_overrides(scenario, overrides);
    scenario.validate();

    if (check_cmd->parsed())
    {
      std::cout << stepmpc::serialize_config(scenario);
      return kExitOk;
    }
    if (sweep_cmd->parsed())
      return run_sweep(scenario, magnitudes);
    return run_one(scenario, dump_qp);
  }
  catch (const stepmpc::ConfigError& e)
  {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  }
  catch (const std::exception& e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
}
