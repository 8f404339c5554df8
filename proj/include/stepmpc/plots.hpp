#pragma once

#include <stepmpc/config.hpp>
#include <stepmpc/harness.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace stepmpc {

namespace svg {

inline std::string num(double v)
{
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.2f", v);
  return buffer;
}

inline std::string label(double v)
{
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.6g", v);
  return buffer;
}

/// Rounds a raw tick spacing up to the nearest 1/2/5 decade multiple.
inline double nice_step(double range, int target_ticks)
{
  if (!(range > 0.0))
    return 1.0;
  const double raw = range / std::max(target_ticks, 1);
  const double magnitude = std::pow(10.0, std::floor(std::log10(raw)));
  const double fraction = raw / magnitude;
  double nice = 10.0;
  if (fraction <= 1.0)
    nice = 1.0;
  else if (fraction <= 2.0)
    nice = 2.0;
  else if (fraction <= 5.0)
    nice = 5.0;
  return nice * magnitude;
}

/// Minimal line-chart canvas: data-space drawing onto a fixed-margin SVG.
class Plot
{
public:
  Plot(std::string title, std::string x_label, std::string y_label, double width = 760,
       double height = 420)
      : title_(std::move(title)),
        x_label_(std::move(x_label)),
        y_label_(std::move(y_label)),
        width_(width),
        height_(height)
  {
  }

  void include(double x, double y)
  {
    if (!std::isfinite(x) || !std::isfinite(y))
      return;
    if (!has_range_)
    {
      x_min_ = x_max_ = x;
      y_min_ = y_max_ = y;
      has_range_ = true;
      return;
    }
    x_min_ = std::min(x_min_, x);
    x_max_ = std::max(x_max_, x);
    y_min_ = std::min(y_min_, y);
    y_max_ = std::max(y_max_, y);
  }

  void pad(double x_fraction = 0.05, double y_fraction = 0.08)
  {
    finalize_range();
    const double dx = (x_max_ - x_min_) * x_fraction;
    const double dy = (y_max_ - y_min_) * y_fraction;
    x_min_ -= dx;
    x_max_ += dx;
    y_min_ -= dy;
    y_max_ += dy;
  }

  /// Forces 1:1 data aspect (plan views) by widening the smaller axis.
  void equal_aspect()
  {
    finalize_range();
    const double span_x = x_max_ - x_min_;
    const double span_y = y_max_ - y_min_;
    const double per_px_x = span_x / plot_width();
    const double per_px_y = span_y / plot_height();
    const double per_px = std::max(per_px_x, per_px_y);
    const double cx = 0.5 * (x_min_ + x_max_);
    const double cy = 0.5 * (y_min_ + y_max_);
    x_min_ = cx - 0.5 * per_px * plot_width();
    x_max_ = cx + 0.5 * per_px * plot_width();
    y_min_ = cy - 0.5 * per_px * plot_height();
    y_max_ = cy + 0.5 * per_px * plot_height();
  }

  double px(double x) const
  {
    return margin_left_ + (x - x_min_) / (x_max_ - x_min_) * plot_width();
  }
  double py(double y) const
  {
    return height_ - margin_bottom_ - (y - y_min_) / (y_max_ - y_min_) * plot_height();
  }

  void polyline(const std::vector<std::pair<double, double>>& points,
                const std::string& color, double stroke = 1.6,
                const std::string& dash = "")
  {
    if (points.size() < 2)
      return;
    body_ += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" +
             num(stroke) + "\"";
    if (!dash.empty())
      body_ += " stroke-dasharray=\"" + dash + "\"";
    body_ += " points=\"";
    for (const auto& [x, y] : points)
    {
      body_ += num(px(x));
      body_ += ',';
      body_ += num(py(y));
      body_ += ' ';
    }
    body_ += "\"/>\n";
  }

  void rect(double x0, double y0, double x1, double y1, const std::string& fill,
            const std::string& stroke, double opacity = 1.0)
  {
    const double left = px(std::min(x0, x1));
    const double right = px(std::max(x0, x1));
    const double top = py(std::max(y0, y1));
    const double bottom = py(std::min(y0, y1));
    body_ += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" +
             num(right - left) + "\" height=\"" + num(bottom - top) + "\" fill=\"" +
             fill + "\" stroke=\"" + stroke + "\" opacity=\"" + num(opacity) + "\"/>\n";
  }

  void hline(double y, const std::string& color, const std::string& dash = "4,3")
  {
    body_ += "<line x1=\"" + num(margin_left_) + "\" y1=\"" + num(py(y)) + "\" x2=\"" +
             num(width_ - margin_right_) + "\" y2=\"" + num(py(y)) + "\" stroke=\"" +
             color + "\" stroke-width=\"1\" stroke-dasharray=\"" + dash + "\"/>\n";
  }

  void vline(double x, const std::string& color, const std::string& dash = "4,3")
  {
    body_ += "<line x1=\"" + num(px(x)) + "\" y1=\"" + num(margin_top_) + "\" x2=\"" +
             num(px(x)) + "\" y2=\"" + num(height_ - margin_bottom_) + "\" stroke=\"" +
             color + "\" stroke-width=\"1\" stroke-dasharray=\"" + dash + "\"/>\n";
  }

  void circle(double x, double y, double radius_px, const std::string& fill)
  {
    body_ += "<circle cx=\"" + num(px(x)) + "\" cy=\"" + num(py(y)) + "\" r=\"" +
             num(radius_px) + "\" fill=\"" + fill + "\"/>\n";
  }

  void cross(double x, double y, double size_px, const std::string& color)
  {
    const double cx = px(x);
    const double cy = py(y);
    body_ += "<line x1=\"" + num(cx - size_px) + "\" y1=\"" + num(cy - size_px) +
             "\" x2=\"" + num(cx + size_px) + "\" y2=\"" + num(cy + size_px) +
             "\" stroke=\"" + color + "\" stroke-width=\"1.6\"/>\n";
    body_ += "<line x1=\"" + num(cx - size_px) + "\" y1=\"" + num(cy + size_px) +
             "\" x2=\"" + num(cx + size_px) + "\" y2=\"" + num(cy - size_px) +
             "\" stroke=\"" + color + "\" stroke-width=\"1.6\"/>\n";
  }

  void legend_entry(const std::string& name, const std::string& color,
                    const std::string& dash = "")
  {
    legend_.push_back({name, color, dash});
  }

  std::string render()
  {
    finalize_range();
    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width_) +
           "\" height=\"" + num(height_) + "\" viewBox=\"0 0 " + num(width_) + " " +
           num(height_) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += render_axes();
    out += body_;
    out += render_legend();
    out += "<text x=\"" + num(width_ / 2) +
           "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"14\" fill=\"#222\">" +
           title_ + "</text>\n";
    out += "</svg>\n";
    return out;
  }

private:
  double plot_width() const { return width_ - margin_left_ - margin_right_; }
  double plot_height() const { return height_ - margin_top_ - margin_bottom_; }

  void finalize_range()
  {
    if (!has_range_)
    {
      x_min_ = 0.0;
      x_max_ = 1.0;
      y_min_ = 0.0;
      y_max_ = 1.0;
      has_range_ = true;
    }
    if (!(x_max_ > x_min_))
    {
      x_min_ -= 0.5;
      x_max_ += 0.5;
    }
    if (!(y_max_ > y_min_))
    {
      y_min_ -= 0.5;
      y_max_ += 0.5;
    }
  }

  std::string render_axes()
  {
    std::string out;
    const double left = margin_left_;
    const double right = width_ - margin_right_;
    const double top = margin_top_;
    const double bottom = height_ - margin_bottom_;

    const double x_step = nice_step(x_max_ - x_min_, 6);
    for (double x = std::ceil(x_min_ / x_step) * x_step; x <= x_max_ + 1e-9 * x_step;
         x += x_step)
    {
      const double cx = px(x);
      out += "<line x1=\"" + num(cx) + "\" y1=\"" + num(top) + "\" x2=\"" + num(cx) +
             "\" y2=\"" + num(bottom) + "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
      out += "<text x=\"" + num(cx) + "\" y=\"" + num(bottom + 16) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\" "
             "fill=\"#444\">" +
             label(x) + "</text>\n";
    }
    const double y_step = nice_step(y_max_ - y_min_, 5);
    for (double y = std::ceil(y_min_ / y_step) * y_step; y <= y_max_ + 1e-9 * y_step;
         y += y_step)
    {
      const double cy = py(y);
      out += "<line x1=\"" + num(left) + "\" y1=\"" + num(cy) + "\" x2=\"" + num(right) +
             "\" y2=\"" + num(cy) + "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
      out += "<text x=\"" + num(left - 6) + "\" y=\"" + num(cy + 3) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\" "
             "fill=\"#444\">" +
             label(y) + "</text>\n";
    }
    out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" +
           num(right - left) + "\" height=\"" + num(bottom - top) +
           "\" fill=\"none\" stroke=\"#888\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + num((left + right) / 2) + "\" y=\"" + num(height_ - 8) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
           "fill=\"#222\">" +
           x_label_ + "</text>\n";
    out += "<text x=\"14\" y=\"" + num((top + bottom) / 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
           "fill=\"#222\" transform=\"rotate(-90 14 " +
           num((top + bottom) / 2) + ")\">" + y_label_ + "</text>\n";
    return out;
  }

  std::string render_legend()
  {
    if (legend_.empty())
      return {};
    std::string out;
    double y = margin_top_ + 14;
    const double x = width_ - margin_right_ - 150;
    for (const auto& entry : legend_)
    {
      out += "<line x1=\"" + num(x) + "\" y1=\"" + num(y - 4) + "\" x2=\"" +
             num(x + 22) + "\" y2=\"" + num(y - 4) + "\" stroke=\"" + entry.color +
             "\" stroke-width=\"2\"";
      if (!entry.dash.empty())
        out += " stroke-dasharray=\"" + entry.dash + "\"";
      out += "/>\n";
      out += "<text x=\"" + num(x + 28) + "\" y=\"" + num(y) +
             "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#222\">" +
             entry.name + "</text>\n";
      y += 14;
    }
    return out;
  }

  struct LegendEntry
  {
    std::string name;
    std::string color;
    std::string dash;
  };

  std::string title_;
  std::string x_label_;
  std::string y_label_;
  double width_;
  double height_;
  double margin_left_ = 56;
  double margin_right_ = 16;
  double margin_top_ = 30;
  double margin_bottom_ = 40;
  double x_min_ = 0, x_max_ = 1, y_min_ = 0, y_max_ = 1;
  bool has_range_ = false;
  std::string body_;
  std::vector<LegendEntry> legend_;
};

inline void save(const std::string& content, const std::string& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write plot file: " + path);
  out << content;
}

}  // namespace svg

/// Plan view: CoM path over the foot rectangles.
inline void write_plan_view_plot(const RunResult& result, const ScenarioConfig& scenario,
                                 const std::string& path)
{
  svg::Plot plot("CoM plan view", "x [m]", "y [m]", 560, 560);

  const auto& foot = scenario.robot.foot;
  auto foot_corners = [&](const Eigen::Vector3d& center) {
    plot.include(center.x() - foot.half_length, center.y() - foot.half_width);
    plot.include(center.x() + foot.half_length, center.y() + foot.half_width);
  };
  foot_corners(scenario.robot.left_foot_position);
  foot_corners(scenario.robot.right_foot_position);

  std::vector<std::pair<double, double>> com;
  com.reserve(result.log.size());
  for (const auto& row : result.log)
  {
    com.emplace_back(row.state(0), row.state(1));
    plot.include(row.state(0), row.state(1));
  }
  Eigen::Vector3d final_right = scenario.robot.right_foot_position;
  if (!result.log.empty())
    final_right = result.log.back().right_foot_position;
  foot_corners(final_right);
  plot.pad();
  plot.equal_aspect();

  auto draw_foot = [&](const Eigen::Vector3d& center, const std::string& stroke,
                       double opacity) {
    plot.rect(center.x() - foot.half_length, center.y() - foot.half_width,
              center.x() + foot.half_length, center.y() + foot.half_width, "none",
              stroke, opacity);
  };
  draw_foot(scenario.robot.left_foot_position, "#2266cc", 1.0);
  draw_foot(scenario.robot.right_foot_position, "#cc4422", 0.45);
  draw_foot(final_right, "#cc4422", 1.0);

  plot.polyline(com, "#111111", 1.6);
  if (!com.empty())
  {
    plot.circle(com.front().first, com.front().second, 4, "#118833");
    plot.cross(result.summary.final_support_centroid.x(),
               result.summary.final_support_centroid.y(), 5, "#7722aa");
  }
  plot.legend_entry("CoM path", "#111111");
  plot.legend_entry("left foot", "#2266cc");
  plot.legend_entry("right foot", "#cc4422");
  svg::save(plot.render(), path);
}

/// CoM height against the fall threshold and the reference height.
inline void write_height_plot(const RunResult& result, const ScenarioConfig& scenario,
                              const std::string& path)
{
  svg::Plot plot("CoM height", "time [s]", "z [m]");
  std::vector<std::pair<double, double>> series;
  series.reserve(result.log.size());
  for (const auto& row : result.log)
  {
    series.emplace_back(row.time, row.state(2));
    plot.include(row.time, row.state(2));
  }
  plot.include(0.0, scenario.simulation.fall_threshold);
  plot.include(0.0, scenario.robot.com_height);
  plot.pad();
  plot.hline(scenario.robot.com_height, "#118833");
  plot.hline(scenario.simulation.fall_threshold, "#cc2222");
  plot.polyline(series, "#111111", 1.6);
  plot.legend_entry("CoM z", "#111111");
  plot.legend_entry("reference", "#118833", "4,3");
  plot.legend_entry("fall threshold", "#cc2222", "4,3");
  svg::save(plot.render(), path);
}

/// Commanded vs realized normal forces per foot.
inline void write_force_plot(const RunResult& result, const std::string& path)
{
  svg::Plot plot("Normal forces", "time [s]", "force [N]");
  std::vector<std::pair<double, double>> cmd_left, cmd_right, real_left, real_right;
  for (const auto& row : result.log)
  {
    cmd_left.emplace_back(row.time, row.command(2));
    cmd_right.emplace_back(row.time, row.command(8));
    real_left.emplace_back(row.time, row.realized(2));
    real_right.emplace_back(row.time, row.realized(8));
    plot.include(row.time, row.command(2));
    plot.include(row.time, row.command(8));
    plot.include(row.time, row.realized(2));
    plot.include(row.time, row.realized(8));
  }
  plot.pad();
  plot.polyline(real_left, "#99bbee", 2.4);
  plot.polyline(real_right, "#eeaa99", 2.4);
  plot.polyline(cmd_left, "#2266cc", 1.4);
  plot.polyline(cmd_right, "#cc4422", 1.4);
  plot.legend_entry("left cmd", "#2266cc");
  plot.legend_entry("right cmd", "#cc4422");
  plot.legend_entry("left realized", "#99bbee");
  plot.legend_entry("right realized", "#eeaa99");
  svg::save(plot.render(), path);
}

/// Stepping timeline: impact-stage countdown, pushes, trigger, phase strip.
inline void write_timeline_plot(const RunResult& result, const ScenarioConfig& scenario,
                                const std::string& path)
{
  svg::Plot plot("Stepping timeline", "time [s]", "impact stage");
  std::vector<std::pair<double, double>> impact;
  impact.reserve(result.log.size());
  double max_stage = 1.0;
  for (const auto& row : result.log)
  {
    impact.emplace_back(row.time, static_cast<double>(row.impact_stage));
    max_stage = std::max(max_stage, static_cast<double>(row.impact_stage));
    plot.include(row.time, static_cast<double>(row.impact_stage));
  }
  plot.include(0.0, 0.0);
  plot.include(0.0, max_stage);
  plot.pad();

  for (const auto& push : scenario.simulation.pushes)
    plot.rect(push.start_time, 0.0, push.start_time + push.duration, max_stage,
              "#ffcc66", "none", 0.35);

  auto phase_color = [](SupportPhase phase) -> const char* {
    switch (phase)
    {
      case SupportPhase::double_support: return "#bbddbb";
      case SupportPhase::single_support: return "#ddddff";
      case SupportPhase::swing: return "#ffbbbb";
      case SupportPhase::post_step: return "#bbeedd";
    }
    return "#eeeeee";
  };
  const double strip_height = 0.04 * max_stage;
  for (const auto& row : result.log)
    plot.rect(row.time, -strip_height, row.time + scenario.controller.dt, 0.0,
              phase_color(row.phase), "none", 1.0);

  for (const auto& row : result.log)
    if (row.trigger_fired)
      plot.vline(row.time, "#cc2222", "2,2");

  plot.polyline(impact, "#111111", 1.6);
  plot.legend_entry("impact stage", "#111111");
  plot.legend_entry("push window", "#ffcc66");
  plot.legend_entry("trigger", "#cc2222", "2,2");
  svg::save(plot.render(), path);
}

/// Writes the full plot set into `directory` (which must exist).
inline void write_plots(const RunResult& result, const ScenarioConfig& scenario,
                        const std::string& directory)
{
  write_plan_view_plot(result, scenario, directory + "/com_xy.svg");
  write_height_plot(result, scenario, directory + "/com_z.svg");
  write_force_plot(result, directory + "/forces_z.svg");
  write_timeline_plot(result, scenario, directory + "/trigger_timeline.svg");
}

}  // namespace stepmpc
