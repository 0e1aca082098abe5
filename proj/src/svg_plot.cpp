#include "echotrain/svg_plot.hpp"

#include "echotrain/units.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace echotrain {

namespace {

const char *const palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string escape(const std::string &s)
{
  std::string out;
  for (char c : s) {
    switch (c) {
    case '&': out += "&amp;"; break;
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '"': out += "&quot;"; break;
    default: out += c;
    }
  }
  return out;
}

std::string tick_label(double v)
{
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

struct Axis {
  bool log = false;
  double lo = 0.0, hi = 1.0; // in plotted coordinates (log10 for log axes)
  double px_lo = 0.0, px_hi = 1.0;

  double map(double v) const
  {
    const double u = log ? std::log10(v) : v;
    return px_lo + (u - lo) / (hi - lo) * (px_hi - px_lo);
  }

  std::vector<double> ticks() const
  {
    std::vector<double> out;
    if (log) {
      const double step = std::max(1.0, std::ceil((hi - lo) / 8.0));
      for (double e = std::ceil(lo); e <= hi + 1e-9; e += step) out.push_back(std::pow(10.0, e));
      return out;
    }
    const double raw = (hi - lo) / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
      step = m * mag;
      if (step >= raw) break;
    }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step)
      out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return out;
  }
};

bool usable(double v, bool log) { return std::isfinite(v) && (!log || v > 0.0); }

Axis make_axis(const PlotSpec &spec, bool x, double px_lo, double px_hi)
{
  const bool log = x ? spec.log_x : spec.log_y;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto &s : spec.series) {
    const auto &vals = x ? s.x : s.y;
    for (std::size_t i = 0; i < vals.size() && i < s.x.size() && i < s.y.size(); ++i) {
      if (!usable(s.x[i], spec.log_x) || !usable(s.y[i], spec.log_y)) continue;
      const double u = log ? std::log10(vals[i]) : vals[i];
      lo = std::min(lo, u);
      hi = std::max(hi, u);
    }
  }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
    lo -= 0.5;
    hi += 0.5;
  }
  if (log) {
    lo = std::floor(lo);
    hi = std::ceil(hi);
    if (hi == lo) hi += 1.0;
  } else {
    const double pad = 0.04 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  return {log, lo, hi, px_lo, px_hi};
}

} // namespace

std::string render_svg(const PlotSpec &spec)
{
  const double left = 80, right = 20, top = 40, bottom = 60;
  const double w = spec.width, h = spec.height;
  const Axis ax = make_axis(spec, true, left, w - right);
  const Axis ay = make_axis(spec, false, h - bottom, top);

  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
     << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!spec.title.empty())
    os << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(spec.title)
       << "</text>\n";

  // grid and tick labels
  for (double t : ax.ticks()) {
    const double px = ax.map(t);
    os << "<line x1=\"" << px << "\" y1=\"" << top << "\" x2=\"" << px << "\" y2=\"" << h - bottom
       << "\" stroke=\"#e0e0e0\"/>\n";
    os << "<text x=\"" << px << "\" y=\"" << h - bottom + 16 << "\" text-anchor=\"middle\">" << tick_label(t)
       << "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double py = ay.map(t);
    os << "<line x1=\"" << left << "\" y1=\"" << py << "\" x2=\"" << w - right << "\" y2=\"" << py
       << "\" stroke=\"#e0e0e0\"/>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">" << tick_label(t) << "</text>\n";
  }
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << w - left - right << "\" height=\""
     << h - top - bottom << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 18 << "\" text-anchor=\"middle\">"
     << escape(spec.x_label) << "</text>\n";
  os << "<text x=\"18\" y=\"" << (top + h - bottom) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << (top + h - bottom) / 2 << ")\">" << escape(spec.y_label) << "</text>\n";

  std::size_t idx = 0;
  double legend_y = top + 16;
  for (const auto &s : spec.series) {
    const std::string color = s.color.empty() ? palette[idx % std::size(palette)] : s.color;
    ++idx;
    std::ostringstream pts;
    pts.precision(6);
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!usable(s.x[i], spec.log_x) || !usable(s.y[i], spec.log_y)) continue;
      const double px = ax.map(s.x[i]), py = ay.map(s.y[i]);
      if (s.markers)
        os << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
      else
        pts << (n ? " " : "") << px << ',' << py;
      ++n;
    }
    if (!s.markers && n > 0)
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.4\""
         << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"" << pts.str() << "\"/>\n";
    if (!s.label.empty()) {
      os << "<line x1=\"" << left + 10 << "\" y1=\"" << legend_y - 4 << "\" x2=\"" << left + 30 << "\" y2=\""
         << legend_y - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      os << "<text x=\"" << left + 36 << "\" y=\"" << legend_y << "\">" << escape(s.label) << "</text>\n";
      legend_y += 16;
    }
  }
  double note_y = top + 16;
  for (const auto &note : spec.notes) {
    os << "<text x=\"" << w - right - 10 << "\" y=\"" << note_y << "\" text-anchor=\"end\">" << escape(note)
       << "</text>\n";
    note_y += 16;
  }
  os << "</svg>\n";
  return os.str();
}

void write_svg(const PlotSpec &spec, const std::filesystem::path &path)
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << render_svg(spec);
  if (!out) throw std::runtime_error("error writing " + path.string());
}

PlotSpec photon_plot(const Trajectory &traj, const std::string &title)
{
  PlotSpec p;
  p.title = title;
  p.x_label = "t (us)";
  p.y_label = "|alpha|^2";
  PlotSeries s;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    s.x.push_back(traj.times[i] * 1e6);
    s.y.push_back(traj.photon_number[i]);
  }
  p.series.push_back(std::move(s));
  return p;
}

PlotSpec bloch_plot(const Trajectory &traj, const std::string &title)
{
  PlotSpec p;
  p.title = title;
  p.x_label = "t (us)";
  p.y_label = "Bloch component";
  std::vector<double> t_us;
  for (double t : traj.times) t_us.push_back(t * 1e6);
  for (const auto &b : traj.bloch) {
    const std::string tag = "class " + std::to_string(b.class_index);
    p.series.push_back({tag + " sx", t_us, b.sx, false, "", false});
    p.series.push_back({tag + " sy", t_us, b.sy, false, "", true});
    p.series.push_back({tag + " sz", t_us, b.sz, false, "", false});
  }
  return p;
}

PlotSpec echo_decay_plot(const EchoReport &report, const std::string &title)
{
  PlotSpec p;
  p.title = title;
  p.x_label = "echo order k";
  p.y_label = "A_echo";
  p.log_y = true;
  PlotSeries pts{"A_echo", {}, {}, true, "", false};
  for (const auto &e : report.echoes) {
    pts.x.push_back(e.window.order);
    pts.y.push_back(e.photons);
  }
  p.series.push_back(pts);
  if (report.order_fit && !pts.x.empty()) {
    PlotSeries fit{"fit", {}, {}, false, "", true};
    const double k0 = pts.x.front(), k1 = pts.x.back();
    for (int i = 0; i <= 50; ++i) {
      const double k = k0 + (k1 - k0) * i / 50.0;
      fit.x.push_back(k);
      fit.y.push_back(report.order_fit->a * std::exp(-report.order_fit->b * k));
    }
    p.series.push_back(fit);
  }
  if (report.time_fit) {
    std::ostringstream os;
    os.precision(4);
    os << "b = " << report.time_fit->b << " rad/s = 2pi x " << to_hz(report.time_fit->b) / 1e3 << " kHz";
    p.notes.push_back(os.str());
  }
  return p;
}

PlotSpec scaling_plot(const ScalingFit &fit, const std::string &title)
{
  PlotSpec p;
  p.title = title;
  p.x_label = "N";
  p.y_label = "peak |alpha|^2";
  p.log_x = true;
  p.log_y = true;
  PlotSeries pts{"peak", {}, {}, true, "", false};
  for (const auto &[n, v] : fit.points) {
    pts.x.push_back(n);
    pts.y.push_back(v);
  }
  p.series.push_back(pts);
  if (!pts.x.empty()) {
    PlotSeries line{"a N^b", {}, {}, false, "", true};
    const double l0 = std::log(pts.x.front()), l1 = std::log(pts.x.back());
    for (int i = 0; i <= 50; ++i) {
      const double n = std::exp(l0 + (l1 - l0) * i / 50.0);
      line.x.push_back(n);
      line.y.push_back(fit.a * std::pow(n, fit.b));
    }
    p.series.push_back(line);
  }
  std::ostringstream os;
  os.precision(4);
  os << "b = " << fit.b;
  p.notes.push_back(os.str());
  return p;
}

} // namespace echotrain
