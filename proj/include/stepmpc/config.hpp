#pragma once

#include <stepmpc/mpc_controller.hpp>
#include <stepmpc/simulation.hpp>

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stepmpc {

/// Configuration problems carry the dotted field path they refer to.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct RobotConfig
{
  double mass = 30.0;
  double gravity = 9.81;
  double com_height = 0.53;
  Eigen::Vector2d initial_com_offset = Eigen::Vector2d::Zero();
  Eigen::Vector3d left_foot_position = Eigen::Vector3d::Zero();
  Eigen::Vector3d right_foot_position = Eigen::Vector3d(0.0, -0.10, 0.02);
  bool right_foot_in_contact = false;
  FootParams foot;
};

struct ControllerSection
{
  double dt = 0.01;
  int horizon = 25;
  CostWeights weights = CostWeights::defaults();
  SolverSettings solver = ControllerConfig::default_solver_settings();
  double trigger_margin = 0.02;
  double step_duration = 0.6;
  double reach_radius = 0.35;
  double retarget_fraction = 0.5;
  double capture_gain = 1.0;
};

struct SimulationSection
{
  double duration = 5.0;
  std::uint64_t seed = 1;
  WrenchTrackerModel tracker;
  std::vector<PushEvent> pushes;
  Eigen::Vector3d push_lever_arm = Eigen::Vector3d::Zero();
  double fall_threshold = 0.35;
  double impact_timing_error = 0.0;
  double swing_apex = 0.03;
};

struct OutputSection
{
  std::string directory = "out";
  bool plots = true;
  bool timing = false;  // wall-clock column breaks byte-reproducibility
};

struct ScenarioConfig
{
  RobotConfig robot;
  ControllerSection controller;
  SimulationSection simulation;
  OutputSection output;

  void validate() const
  {
    auto fail = [](const std::string& field, const std::string& why) {
      throw ConfigError(field + ": " + why);
    };
    if (!(robot.mass > 0.0))
      fail("robot.mass", "must be > 0");
    if (!(robot.gravity > 0.0))
      fail("robot.gravity", "must be > 0");
    if (!(robot.com_height > 0.0))
      fail("robot.com_height", "must be > 0");
    try
    {
      robot.foot.validate();
    }
    catch (const std::invalid_argument& e)
    {
      fail("robot.foot", e.what());
    }
    if (!(controller.dt > 0.0))
      fail("controller.dt", "must be > 0");
    if (controller.horizon < 1)
      fail("controller.horizon", "must be >= 1");
    try
    {
      controller.weights.validate();
    }
    catch (const std::invalid_argument& e)
    {
      fail("controller.weights", e.what());
    }
    if (!(controller.solver.abs_tolerance > 0.0) ||
        !(controller.solver.rel_tolerance > 0.0))
      fail("controller.solver", "tolerances must be > 0");
    if (controller.solver.max_iterations < 1)
      fail("controller.solver.max_iterations", "must be >= 1");
    if (!(controller.step_duration > 0.0))
      fail("controller.step_duration", "must be > 0");
    if (!(controller.reach_radius > 0.0))
      fail("controller.reach_radius", "must be > 0");
    if (controller.retarget_fraction < 0.0 || controller.retarget_fraction > 1.0)
      fail("controller.retarget_fraction", "must be in [0, 1]");
    if (!(controller.capture_gain > 0.0))
      fail("controller.capture_gain", "must be > 0");
    if (simulation.duration < 0.0)
      fail("simulation.duration", "must be >= 0");
    if (simulation.tracker.time_constant < 0.0)
      fail("simulation.tracker.time_constant", "must be >= 0");
    if (simulation.tracker.noise_std < 0.0)
      fail("simulation.tracker.noise_std", "must be >= 0");
    for (size_t i = 0; i < simulation.pushes.size(); ++i)
    {
      const auto& push = simulation.pushes[i];
      const std::string field = "simulation.pushes[" + std::to_string(i) + "]";
      if (!(push.duration > 0.0))
        fail(field + ".duration", "must be > 0");
      if (push.magnitude < 0.0)
        fail(field + ".magnitude", "must be >= 0");
      if (push.start_time < 0.0)
        fail(field + ".start_time", "must be >= 0");
    }
    if (!(simulation.fall_threshold < robot.com_height))
      fail("simulation.fall_threshold", "must be below robot.com_height");
    if (simulation.swing_apex < 0.0)
      fail("simulation.swing_apex", "must be >= 0");
  }
};

/// Maps the scenario onto the controller's own configuration.
inline ControllerConfig controller_config(const ScenarioConfig& scenario)
{
  ControllerConfig c;
  c.dt = scenario.controller.dt;
  c.horizon = scenario.controller.horizon;
  c.mass = scenario.robot.mass;
  c.gravity = scenario.robot.gravity;
  c.left_foot_position = scenario.robot.left_foot_position;
  c.com_height_ref = scenario.robot.com_height;
  c.weights = scenario.controller.weights;
  c.foot = scenario.robot.foot;
  c.solver = scenario.controller.solver;
  c.trigger_margin = scenario.controller.trigger_margin;
  c.step_duration = scenario.controller.step_duration;
  c.reach_radius = scenario.controller.reach_radius;
  c.retarget_fraction = scenario.controller.retarget_fraction;
  c.capture_gain = scenario.controller.capture_gain;
  return c;
}

/// Maps the scenario onto the plant's parameters.
inline Plant::Params plant_params(const ScenarioConfig& scenario)
{
  Plant::Params p;
  p.geometry.mass = scenario.robot.mass;
  p.geometry.gravity = scenario.robot.gravity;
  p.geometry.left_foot_position = scenario.robot.left_foot_position;
  p.geometry.right_foot_position = scenario.robot.right_foot_position;
  p.initial_state.com_position
      << scenario.robot.left_foot_position.head<2>() + scenario.robot.initial_com_offset,
      scenario.robot.com_height;
  if (scenario.robot.right_foot_in_contact)
  {
    p.initial_state.com_position.head<2>() =
        0.5 * (scenario.robot.left_foot_position.head<2>() +
               scenario.robot.right_foot_position.head<2>()) +
        scenario.robot.initial_com_offset;
  }
  p.right_foot_in_contact = scenario.robot.right_foot_in_contact;
  p.tracker = scenario.simulation.tracker;
  p.seed = scenario.simulation.seed;
  p.pushes = scenario.simulation.pushes;
  p.push_lever_arm = scenario.simulation.push_lever_arm;
  p.swing_apex = scenario.simulation.swing_apex;
  return p;
}

namespace detail {

using Json = nlohmann::json;

/// Strict object reader: every key must be consumed, unknown keys are errors
/// that name their dotted path.
class SectionReader
{
public:
  SectionReader(const Json& json, std::string path) : json_(json), path_(std::move(path))
  {
    if (!json_.is_object())
      throw ConfigError(path_ + ": expected an object");
  }

  bool has(const char* key) const { return json_.contains(key); }

  void read_double(const char* key, double& target)
  {
    if (!mark(key))
      return;
    const Json& v = json_.at(key);
    if (!v.is_number())
      throw ConfigError(field(key) + ": expected a number");
    target = v.get<double>();
  }

  void read_int(const char* key, int& target)
  {
    if (!mark(key))
      return;
    const Json& v = json_.at(key);
    if (!v.is_number_integer())
      throw ConfigError(field(key) + ": expected an integer");
    target = v.get<int>();
  }

  void read_uint64(const char* key, std::uint64_t& target)
  {
    if (!mark(key))
      return;
    const Json& v = json_.at(key);
    if (!v.is_number_unsigned() && !v.is_number_integer())
      throw ConfigError(field(key) + ": expected an integer");
    target = v.get<std::uint64_t>();
  }

  void read_bool(const char* key, bool& target)
  {
    if (!mark(key))
      return;
    const Json& v = json_.at(key);
    if (!v.is_boolean())
      throw ConfigError(field(key) + ": expected a boolean");
    target = v.get<bool>();
  }

  void read_string(const char* key, std::string& target)
  {
    if (!mark(key))
      return;
    const Json& v = json_.at(key);
    if (!v.is_string())
      throw ConfigError(field(key) + ": expected a string");
    target = v.get<std::string>();
  }

  template <int N>
  void read_fixed_vector(const char* key, Eigen::Matrix<double, N, 1>& target)
  {
    if (!mark(key))
      return;
    const Json& v = json_.at(key);
    if (!v.is_array() || v.size() != N)
      throw ConfigError(field(key) + ": expected an array of " + std::to_string(N) +
                        " numbers");
    for (int i = 0; i < N; ++i)
    {
      if (!v[static_cast<size_t>(i)].is_number())
        throw ConfigError(field(key) + ": expected an array of numbers");
      target(i) = v[static_cast<size_t>(i)].get<double>();
    }
  }

  /// Diagonal weights accept a scalar (uniform) or an exact-length array.
  template <int N>
  void read_diagonal(const char* key, Eigen::Matrix<double, N, 1>& target)
  {
    if (!mark(key))
      return;
    const Json& v = json_.at(key);
    if (v.is_number())
    {
      target.setConstant(v.get<double>());
      return;
    }
    if (!v.is_array() || v.size() != N)
      throw ConfigError(field(key) + ": expected a number or an array of " +
                        std::to_string(N) + " numbers");
    for (int i = 0; i < N; ++i)
    {
      if (!v[static_cast<size_t>(i)].is_number())
        throw ConfigError(field(key) + ": expected numeric entries");
      target(i) = v[static_cast<size_t>(i)].get<double>();
    }
  }

  const Json* child_object(const char* key)
  {
    if (!mark(key))
      return nullptr;
    return &json_.at(key);
  }

  const Json* child_array(const char* key)
  {
    if (!mark(key))
      return nullptr;
    const Json& v = json_.at(key);
    if (!v.is_array())
      throw ConfigError(field(key) + ": expected an array");
    return &v;
  }

  std::string field(const char* key) const { return path_ + "." + key; }

  void finish() const
  {
    for (const auto& item : json_.items())
      if (consumed_.find(item.key()) == consumed_.end())
        throw ConfigError(path_ + ": unknown key \"" + item.key() + "\"");
  }

private:
  bool mark(const char* key)
  {
    if (!json_.contains(key))
      return false;
    consumed_.insert(key);
    return true;
  }

  const Json& json_;
  std::string path_;
  std::set<std::string> consumed_;
};

inline void read_robot(const Json& json, RobotConfig& robot)
{
  SectionReader r(json, "robot");
  r.read_double("mass", robot.mass);
  r.read_double("gravity", robot.gravity);
  r.read_double("com_height", robot.com_height);
  r.read_fixed_vector<2>("initial_com_offset", robot.initial_com_offset);
  r.read_fixed_vector<3>("left_foot_position", robot.left_foot_position);
  r.read_fixed_vector<3>("right_foot_position", robot.right_foot_position);
  r.read_bool("right_foot_in_contact", robot.right_foot_in_contact);
  if (const Json* foot = r.child_object("foot"))
  {
    SectionReader f(*foot, "robot.foot");
    f.read_double("friction_coefficient", robot.foot.friction_coefficient);
    f.read_double("torsional_friction_coefficient",
                  robot.foot.torsional_friction_coefficient);
    f.read_double("half_length", robot.foot.half_length);
    f.read_double("half_width", robot.foot.half_width);
    f.read_double("max_normal_force", robot.foot.max_normal_force);
    f.read_int("pyramid_facets", robot.foot.pyramid_facets);
    f.finish();
  }
  r.finish();
}

inline void read_controller(const Json& json, ControllerSection& controller)
{
  SectionReader r(json, "controller");
  r.read_double("dt", controller.dt);
  r.read_int("horizon", controller.horizon);
  if (const Json* weights = r.child_object("weights"))
  {
    SectionReader w(*weights, "controller.weights");
    w.read_diagonal<9>("k_gamma", controller.weights.k_gamma);
    w.read_diagonal<9>("k_gamma_imp", controller.weights.k_gamma_imp);
    w.read_diagonal<12>("k_f", controller.weights.k_f);
    w.read_diagonal<12>("k_df", controller.weights.k_df);
    w.finish();
  }
  if (const Json* solver = r.child_object("solver"))
  {
    SectionReader s(*solver, "controller.solver");
    s.read_double("abs_tolerance", controller.solver.abs_tolerance);
    s.read_double("rel_tolerance", controller.solver.rel_tolerance);
    s.read_int("max_iterations", controller.solver.max_iterations);
    s.read_double("rho", controller.solver.rho);
    s.read_bool("polish", controller.solver.polish);
    s.finish();
  }
  r.read_double("trigger_margin", controller.trigger_margin);
  r.read_double("step_duration", controller.step_duration);
  r.read_double("reach_radius", controller.reach_radius);
  r.read_double("retarget_fraction", controller.retarget_fraction);
  r.read_double("capture_gain", controller.capture_gain);
  r.finish();
}

inline void read_simulation(const Json& json, SimulationSection& simulation)
{
  SectionReader r(json, "simulation");
  r.read_double("duration", simulation.duration);
  r.read_uint64("seed", simulation.seed);
  if (const Json* tracker = r.child_object("tracker"))
  {
    SectionReader t(*tracker, "simulation.tracker");
    t.read_double("time_constant", simulation.tracker.time_constant);
    t.read_double("noise_std", simulation.tracker.noise_std);
    t.finish();
  }
  if (const Json* pushes = r.child_array("pushes"))
  {
    simulation.pushes.clear();
    for (size_t i = 0; i < pushes->size(); ++i)
    {
      SectionReader p((*pushes)[i], "simulation.pushes[" + std::to_string(i) + "]");
      PushEvent push;
      p.read_double("start_time", push.start_time);
      p.read_double("duration", push.duration);
      p.read_double("magnitude", push.magnitude);
      p.read_double("angle_deg", push.angle_deg);
      p.finish();
      simulation.pushes.push_back(push);
    }
  }
  r.read_fixed_vector<3>("push_lever_arm", simulation.push_lever_arm);
  r.read_double("fall_threshold", simulation.fall_threshold);
  r.read_double("impact_timing_error", simulation.impact_timing_error);
  r.read_double("swing_apex", simulation.swing_apex);
  r.finish();
}

inline void read_output(const Json& json, OutputSection& output)
{
  SectionReader r(json, "output");
  r.read_string("directory", output.directory);
  r.read_bool("plots", output.plots);
  r.read_bool("timing", output.timing);
  r.finish();
}

}  // namespace detail

/// Parses a scenario from JSON text. Comments are permitted; unknown keys and
/// type mismatches are rejected with the offending dotted path; an empty
/// document yields the defaults.
inline ScenarioConfig parse_config(const std::string& text)
{
  ScenarioConfig config;
  std::string stripped;
  stripped.reserve(text.size());
  for (char ch : text)
    if (!std::isspace(static_cast<unsigned char>(ch)))
      stripped.push_back(ch);
  if (stripped.empty())
  {
    config.validate();
    return config;
  }

  detail::Json json;
  try
  {
    json = detail::Json::parse(text, nullptr, true, /*ignore_comments=*/true);
  }
  catch (const detail::Json::parse_error& e)
  {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!json.is_object())
    throw ConfigError("config: top level must be an object");

  detail::SectionReader root(json, "config");
  if (const detail::Json* robot = root.child_object("robot"))
    detail::read_robot(*robot, config.robot);
  if (const detail::Json* controller = root.child_object("controller"))
    detail::read_controller(*controller, config.controller);
  if (const detail::Json* simulation = root.child_object("simulation"))
    detail::read_simulation(*simulation, config.simulation);
  if (const detail::Json* output = root.child_object("output"))
    detail::read_output(*output, config.output);
  root.finish();

  config.validate();
  return config;
}

inline ScenarioConfig load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

/// Full serialization; load(serialize(config)) == config.
inline detail::Json to_json(const ScenarioConfig& config)
{
  using detail::Json;
  auto vec = [](const auto& v) {
    Json arr = Json::array();
    for (int i = 0; i < v.size(); ++i)
      arr.push_back(v(i));
    return arr;
  };

  Json json;
  json["robot"] = {
      {"mass", config.robot.mass},
      {"gravity", config.robot.gravity},
      {"com_height", config.robot.com_height},
      {"initial_com_offset", vec(config.robot.initial_com_offset)},
      {"left_foot_position", vec(config.robot.left_foot_position)},
      {"right_foot_position", vec(config.robot.right_foot_position)},
      {"right_foot_in_contact", config.robot.right_foot_in_contact},
      {"foot",
       {{"friction_coefficient", config.robot.foot.friction_coefficient},
        {"torsional_friction_coefficient",
         config.robot.foot.torsional_friction_coefficient},
        {"half_length", config.robot.foot.half_length},
        {"half_width", config.robot.foot.half_width},
        {"max_normal_force", config.robot.foot.max_normal_force},
        {"pyramid_facets", config.robot.foot.pyramid_facets}}},
  };
  json["controller"] = {
      {"dt", config.controller.dt},
      {"horizon", config.controller.horizon},
      {"weights",
       {{"k_gamma", vec(config.controller.weights.k_gamma)},
        {"k_gamma_imp", vec(config.controller.weights.k_gamma_imp)},
        {"k_f", vec(config.controller.weights.k_f)},
        {"k_df", vec(config.controller.weights.k_df)}}},
      {"solver",
       {{"abs_tolerance", config.controller.solver.abs_tolerance},
        {"rel_tolerance", config.controller.solver.rel_tolerance},
        {"max_iterations", config.controller.solver.max_iterations},
        {"rho", config.controller.solver.rho},
        {"polish", config.controller.solver.polish}}},
      {"trigger_margin", config.controller.trigger_margin},
      {"step_duration", config.controller.step_duration},
      {"reach_radius", config.controller.reach_radius},
      {"retarget_fraction", config.controller.retarget_fraction},
      {"capture_gain", config.controller.capture_gain},
  };
  Json pushes = detail::Json::array();
  for (const auto& push : config.simulation.pushes)
    pushes.push_back({{"start_time", push.start_time},
                      {"duration", push.duration},
                      {"magnitude", push.magnitude},
                      {"angle_deg", push.angle_deg}});
  json["simulation"] = {
      {"duration", config.simulation.duration},
      {"seed", config.simulation.seed},
      {"tracker",
       {{"time_constant", config.simulation.tracker.time_constant},
        {"noise_std", config.simulation.tracker.noise_std}}},
      {"pushes", pushes},
      {"push_lever_arm", vec(config.simulation.push_lever_arm)},
      {"fall_threshold", config.simulation.fall_threshold},
      {"impact_timing_error", config.simulation.impact_timing_error},
      {"swing_apex", config.simulation.swing_apex},
  };
  json["output"] = {
      {"directory", config.output.directory},
      {"plots", config.output.plots},
      {"timing", config.output.timing},
  };
  return json;
}

inline std::string serialize_config(const ScenarioConfig& config)
{
  return to_json(config).dump(2) + "\n";
}

inline void save_config(const ScenarioConfig& config, const std::string& path)
{
  std::ofstream out(path);
  if (!out)
    throw ConfigError("cannot write config file: " + path);
  out << serialize_config(config);
}

}  // namespace stepmpc
