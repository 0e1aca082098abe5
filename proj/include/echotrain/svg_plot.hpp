#pragma once

#include "echotrain/analytic_echo.hpp"
#include "echotrain/echo_analysis.hpp"
#include "echotrain/trajectory.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace echotrain {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false; ///< draw points instead of a polyline
  std::string color;    ///< empty picks from the palette
  bool dashed = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  double width = 720;
  double height = 440;
  std::vector<PlotSeries> series;
  std::vector<std::string> notes; ///< text lines drawn in the upper right corner
};

/// Minimal SVG line plot. On log axes non-positive points are dropped.
std::string render_svg(const PlotSpec &spec);
void write_svg(const PlotSpec &spec, const std::filesystem::path &path);

/// |α|²(t) in µs.
PlotSpec photon_plot(const Trajectory &traj, const std::string &title);
/// sx, sy, sz of each recorded class.
PlotSpec bloch_plot(const Trajectory &traj, const std::string &title);
/// A_echo against echo order, log ordinate, with the fitted exponential.
PlotSpec echo_decay_plot(const EchoReport &report, const std::string &title);
/// Peak |α|² against N, log-log, with the fitted power law.
PlotSpec scaling_plot(const ScalingFit &fit, const std::string &title);

} // namespace echotrain
