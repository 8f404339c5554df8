#pragma once

#include <stepmpc/config.hpp>
#include <stepmpc/harness.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stepmpc {

namespace detail {

/// Shortest exact decimal form; the same doubles always print the same bytes.
inline std::string format_number(double value)
{
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

}  // namespace detail

/// Stable schema: the first 38 columns are the core record (state, commanded
/// and realized wrenches, stepping/solver counters); the rest are diagnostic
/// extras. Bare wrench columns are the command; `_real` is the tracker
/// output actually applied to the plant.
inline const std::vector<std::string>& csv_columns()
{
  static const std::vector<std::string> columns = {
      "t",
      "com_x", "com_y", "com_z",
      "vx", "vy", "vz",
      "hx", "hy", "hz",
      "fl_fx", "fl_fy", "fl_fz", "fl_tx", "fl_ty", "fl_tz",
      "fr_fx", "fr_fy", "fr_fz", "fr_tx", "fr_ty", "fr_tz",
      "fl_fx_real", "fl_fy_real", "fl_fz_real", "fl_tx_real", "fl_ty_real", "fl_tz_real",
      "fr_fx_real", "fr_fy_real", "fr_fz_real", "fr_tx_real", "fr_ty_real", "fr_tz_real",
      "k_impact", "trigger", "solve_ms", "solve_iters",
      "push_x", "push_y", "push_z",
      "rfoot_x", "rfoot_y", "rfoot_z",
      "left_contact", "right_contact",
      "phase", "degraded", "status",
      "primal_residual", "dual_residual", "polished",
  };
  return columns;
}

inline std::string csv_header()
{
  std::string line;
  const auto& columns = csv_columns();
  for (size_t i = 0; i < columns.size(); ++i)
  {
    if (i > 0)
      line += ',';
    line += columns[i];
  }
  line += '\n';
  return line;
}

inline std::string csv_row(const RunLogRow& row)
{
  using detail::format_number;
  std::string line;
  line.reserve(1024);
  auto number = [&](double v) {
    line += format_number(v);
    line += ',';
  };
  number(row.time);
  for (int i = 0; i < 9; ++i)
    number(row.state(i));
  for (int i = 0; i < 12; ++i)
    number(row.command(i));
  for (int i = 0; i < 12; ++i)
    number(row.realized(i));
  line += std::to_string(row.impact_stage);
  line += ',';
  line += row.trigger_fired ? "1," : "0,";
  number(row.solve_ms);
  line += std::to_string(row.solve_iterations);
  line += ',';
  for (int i = 0; i < 3; ++i)
    number(row.push(i));
  for (int i = 0; i < 3; ++i)
    number(row.right_foot_position(i));
  line += row.left_contact ? "1," : "0,";
  line += row.right_contact ? "1," : "0,";
  line += to_string(row.phase);
  line += ',';
  line += row.degraded ? "1," : "0,";
  line += to_string(row.solve_status);
  line += ',';
  line += format_number(row.primal_residual);
  line += ',';
  line += format_number(row.dual_residual);
  line += ',';
  line += row.solution_polished ? "1" : "0";
  line += '\n';
  return line;
}

inline void write_csv(const std::vector<RunLogRow>& log, const std::string& path)
{
  std::ofstream out(path, std::ios::binary);  // binary: identical bytes everywhere
  if (!out)
    throw std::runtime_error("cannot write CSV file: " + path);
  out << csv_header();
  for (const auto& row : log)
    out << csv_row(row);
}

inline detail::Json summary_json(const RunSummary& summary)
{
  using detail::Json;
  auto finite_or_null = [](double v) {
    return std::isfinite(v) ? Json(v) : Json(nullptr);
  };
  Json json;
  json["fell"] = summary.fell;
  json["fall_time"] = finite_or_null(summary.fall_time);
  json["step_taken"] = summary.step_taken;
  json["trigger_time"] = finite_or_null(summary.trigger_time);
  json["impact_time"] = finite_or_null(summary.impact_time);
  json["last_push_end"] = summary.last_push_end;
  json["settle_time"] = finite_or_null(summary.settle_time);
  json["settle_radius"] = summary.settle_radius;
  json["final_support_centroid"] = {summary.final_support_centroid.x(),
                                    summary.final_support_centroid.y()};
  json["final_transverse_error"] = summary.final_transverse_error;
  json["max_transverse_error"] = summary.max_transverse_error;
  json["min_com_height"] = finite_or_null(summary.min_com_height);
  json["ticks"] = summary.ticks;
  json["degraded_ticks"] = summary.degraded_ticks;
  json["median_solve_ms"] = summary.median_solve_ms;
  return json;
}

inline void write_summary(const RunSummary& summary, const std::string& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write summary file: " + path);
  out << summary_json(summary).dump(2) << "\n";
}

}  // namespace stepmpc
