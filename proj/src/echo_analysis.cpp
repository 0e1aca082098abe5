#include "echotrain/echo_analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace echotrain {

namespace {

// Ordinary least squares y = c0 + c1 x; returns {c0, c1, rms residual}.
std::array<double, 3> line_fit(const std::vector<double> &x, const std::vector<double> &y)
{
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit: abscissae must not all coincide");
  const double c1 = sxy / sxx;
  const double c0 = my - c1 * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (c0 + c1 * x[i]);
    ss += r * r;
  }
  return {c0, c1, std::sqrt(ss / n)};
}

double photons_at(const Trajectory &traj, double t)
{
  const auto &ts = traj.times;
  auto it = std::lower_bound(ts.begin(), ts.end(), t);
  if (it == ts.end()) return traj.photon_number.back();
  const auto i = static_cast<std::size_t>(it - ts.begin());
  if (*it == t || i == 0) return traj.photon_number[i];
  const double w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
  return (1.0 - w) * traj.photon_number[i - 1] + w * traj.photon_number[i];
}

} // namespace

void EchoSettings::validate() const
{
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("echo analysis: tau must be positive");
  if (max_order < 1) throw std::invalid_argument("echo analysis: max_order must be at least 1");
  if (!(window_frac > 0.0 && window_frac < 0.5))
    throw std::invalid_argument("echo analysis: window_frac must lie in (0, 0.5) so windows stay disjoint");
  if (!std::isfinite(guard)) throw std::invalid_argument("echo analysis: guard must be finite");
  if (!(noise_floor >= 0.0 && noise_floor < 1.0))
    throw std::invalid_argument("echo analysis: noise_floor must lie in [0, 1)");
}

nlohmann::json to_json(const EchoSettings &s)
{
  return {{"tau", s.tau},
          {"max_order", s.max_order},
          {"window_frac", s.window_frac},
          {"guard", s.guard},
          {"noise_floor", s.noise_floor}};
}

EchoSettings echo_settings_from_json(const nlohmann::json &j)
{
  EchoSettings s;
  s.tau = j.at("tau").get<double>();
  s.max_order = j.value("max_order", s.max_order);
  s.window_frac = j.value("window_frac", s.window_frac);
  s.guard = j.value("guard", s.guard);
  s.noise_floor = j.value("noise_floor", s.noise_floor);
  s.validate();
  return s;
}

std::vector<EchoWindow> echo_windows(const PulseSequence &seq, const EchoSettings &settings, double kappa,
                                     double t_first, double t_last)
{
  settings.validate();
  double guard = settings.guard;
  if (guard < 0.0) {
    if (!(kappa > 0.0)) throw std::invalid_argument("echo analysis: default guard 5/kappa needs kappa > 0");
    guard = 5.0 / kappa;
  }
  const double t_ref = seq.empty() ? 0.0 : seq.pulses().front().t_start;
  const double tau = settings.tau;

  std::vector<EchoWindow> out;
  for (int k = 1; k <= settings.max_order; ++k) {
    const double centre = t_ref + (k + 1) * tau;
    EchoWindow w{k, centre - settings.window_frac * tau, centre + settings.window_frac * tau};
    w.t_lo = std::max(w.t_lo, t_first);
    w.t_hi = std::min(w.t_hi, t_last);
    for (const auto &p : seq.pulses()) {
      const double lo = p.t_start, hi = p.t_stop() + guard;
      if (hi <= w.t_lo || lo >= w.t_hi) continue;
      if (lo <= centre && centre <= hi)
        throw std::invalid_argument("echo window " + std::to_string(k) + " is centred inside a pulse or its guard");
      if (hi < centre)
        w.t_lo = hi;
      else
        w.t_hi = lo;
    }
    if (!(w.t_hi > w.t_lo)) throw std::invalid_argument("echo window " + std::to_string(k) + " is empty after clipping");
    out.push_back(w);
  }
  return out;
}

double integrate_echo(const Trajectory &traj, double t_lo, double t_hi, double kappa)
{
  if (traj.empty()) throw std::invalid_argument("integrate_echo: empty trajectory");
  if (!(t_hi >= t_lo)) throw std::invalid_argument("integrate_echo: window end precedes its start");
  const auto &ts = traj.times;
  const double slack = 1e-9 * (ts.back() - ts.front());
  if (t_lo < ts.front() - slack || t_hi > ts.back() + slack)
    throw std::invalid_argument("integrate_echo: window lies outside the trajectory");
  t_lo = std::max(t_lo, ts.front());
  t_hi = std::min(t_hi, ts.back());

  double sum = 0.0;
  double t_prev = t_lo, n_prev = photons_at(traj, t_lo);
  auto it = std::upper_bound(ts.begin(), ts.end(), t_lo);
  for (; it != ts.end() && *it < t_hi; ++it) {
    const auto i = static_cast<std::size_t>(it - ts.begin());
    sum += 0.5 * (n_prev + traj.photon_number[i]) * (*it - t_prev);
    t_prev = *it;
    n_prev = traj.photon_number[i];
  }
  sum += 0.5 * (n_prev + photons_at(traj, t_hi)) * (t_hi - t_prev);
  return kappa * sum;
}

EchoReport detect_echoes(const Trajectory &traj, const PulseSequence &seq, const EchoSettings &settings, double kappa)
{
  if (traj.empty()) throw std::invalid_argument("detect_echoes: empty trajectory");
  settings.validate();
  EchoReport report;
  report.settings = settings;
  report.t_ref = seq.empty() ? 0.0 : seq.pulses().front().t_start;
  report.guard = settings.guard >= 0.0 ? settings.guard : 5.0 / kappa;
  const double needed = report.t_ref + (settings.max_order + 1) * settings.tau;
  if (traj.times.back() < needed)
    throw std::invalid_argument("detect_echoes: trajectory ends before the last expected echo");

  const auto windows = echo_windows(seq, settings, kappa, traj.times.front(), traj.times.back());

  std::vector<Echo> found;
  std::vector<bool> interior;
  double global = 0.0;
  for (const auto &w : windows) {
    auto lo = std::lower_bound(traj.times.begin(), traj.times.end(), w.t_lo);
    auto hi = std::upper_bound(traj.times.begin(), traj.times.end(), w.t_hi);
    if (lo == hi) throw std::invalid_argument("echo window " + std::to_string(w.order) + " contains no samples");
    const auto i0 = static_cast<std::size_t>(lo - traj.times.begin());
    const auto i1 = static_cast<std::size_t>(hi - traj.times.begin());
    std::size_t best = i0;
    for (std::size_t i = i0; i < i1; ++i) {
      if (traj.photon_number[i] > traj.photon_number[best]) best = i;
    }
    Echo e;
    e.window = w;
    e.t_peak = traj.times[best];
    e.peak = traj.photon_number[best];
    e.photons = integrate_echo(traj, w.t_lo, w.t_hi, kappa);
    global = std::max(global, e.peak);
    found.push_back(e);
    // A maximum on the window edge is the flank of something else, not an echo.
    interior.push_back(best > i0 && best + 1 < i1);
  }

  report.noise_floor = settings.noise_floor * global;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (!interior[i] || !(found[i].peak > report.noise_floor)) break;
    report.echoes.push_back(found[i]);
  }

  if (report.echoes.size() >= 2) {
    std::vector<std::pair<double, double>> by_time, by_order;
    bool positive = true;
    for (const auto &e : report.echoes) {
      positive = positive && e.photons > 0.0;
      by_time.emplace_back((e.window.order + 1) * settings.tau, e.photons);
      by_order.emplace_back(e.window.order, e.photons);
    }
    if (positive) {
      report.time_fit = fit_exponential(by_time);
      report.order_fit = fit_exponential(by_order);
    }
  }
  return report;
}

ExponentialFit fit_exponential(const std::vector<std::pair<double, double>> &points)
{
  if (points.size() < 2) throw std::invalid_argument("fit_exponential: need at least 2 points");
  std::vector<double> x, y;
  for (const auto &[t, a] : points) {
    if (!(a > 0.0) || !std::isfinite(a) || !std::isfinite(t))
      throw std::invalid_argument("fit_exponential: values must be positive and finite");
    x.push_back(t);
    y.push_back(std::log(a));
  }
  const auto [c0, c1, rms] = line_fit(x, y);
  return {std::exp(c0), -c1, rms};
}

ScalingFit fit_power_law(const std::vector<std::pair<double, double>> &points)
{
  if (points.size() < 3) throw std::invalid_argument("fit_power_law: need at least 3 points");
  std::vector<double> x, y;
  for (const auto &[n, v] : points) {
    if (!(n > 0.0) || !(v > 0.0) || !std::isfinite(n) || !std::isfinite(v))
      throw std::invalid_argument("fit_power_law: values must be positive and finite");
    x.push_back(std::log(n));
    y.push_back(std::log(v));
  }
  const auto [c0, c1, rms] = line_fit(x, y);
  return {std::exp(c0), c1, rms, points};
}

nlohmann::json to_json(const ExponentialFit &f) { return {{"a", f.a}, {"b", f.b}, {"rms_residual", f.residual}}; }

nlohmann::json to_json(const ScalingFit &f)
{
  nlohmann::json pts = nlohmann::json::array();
  for (const auto &[n, v] : f.points) pts.push_back({{"n", n}, {"peak", v}});
  return {{"a", f.a}, {"b", f.b}, {"rms_residual", f.residual}, {"points", pts}};
}

nlohmann::json to_json(const EchoReport &r)
{
  nlohmann::json echoes = nlohmann::json::array();
  for (const auto &e : r.echoes) {
    echoes.push_back({{"order", e.window.order},
                      {"t_lo", e.window.t_lo},
                      {"t_hi", e.window.t_hi},
                      {"t_peak", e.t_peak},
                      {"peak_photons", e.peak},
                      {"a_echo", e.photons}});
  }
  nlohmann::json j = {{"settings", to_json(r.settings)},
                      {"t_ref", r.t_ref},
                      {"guard", r.guard},
                      {"noise_floor_photons", r.noise_floor},
                      {"echoes", echoes}};
  j["time_fit"] = r.time_fit ? to_json(*r.time_fit) : nlohmann::json(nullptr);
  j["order_fit"] = r.order_fit ? to_json(*r.order_fit) : nlohmann::json(nullptr);
  return j;
}

void write_echo_table_csv(const EchoReport &r, const std::filesystem::path &path)
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "k,t_lo,t_hi,t_peak,peak,a_echo\n";
  for (const auto &e : r.echoes) {
    out << e.window.order << ',' << format_double(e.window.t_lo) << ',' << format_double(e.window.t_hi) << ','
        << format_double(e.t_peak) << ',' << format_double(e.peak) << ',' << format_double(e.photons) << '\n';
  }
  if (!out) throw std::runtime_error("error writing " + path.string());
}

} // namespace echotrain
