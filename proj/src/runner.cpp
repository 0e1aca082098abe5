#include "echotrain/runner.hpp"

#include "echotrain/spectrum.hpp"

#include <tbb/parallel_for.h>

#include <cctype>
#include <cmath>
#include <exception>
#include <sstream>

namespace echotrain {

namespace {

double analytic_t_end(const AnalyticSettings &a) { return a.t_end > 0.0 ? a.t_end : 2.0 * a.params.tau; }

} // namespace

int exit_code_for(const std::exception_ptr &e)
{
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError &) {
    return 2;
  } catch (const std::invalid_argument &) {
    return 2;
  } catch (const NumericalInstability &) {
    return 3;
  } catch (const BranchPointError &) {
    return 4;
  } catch (...) {
    return 1;
  }
}

namespace {

std::string failure_text(const std::exception_ptr &e)
{
  try {
    std::rethrow_exception(e);
  } catch (const std::exception &x) {
    return x.what();
  } catch (...) {
    return "unknown error";
  }
}

// Axis value as it appears in a directory name.
std::string key_value(const nlohmann::json &v)
{
  std::string s;
  if (v.is_number_float())
    s = format_double(v.get<double>());
  else if (v.is_string())
    s = v.get<std::string>();
  else if (v.is_object() && v.size() == 1 && v.begin()->is_number())
    s = format_double(v.begin()->get<double>()) + v.begin().key();
  else
    s = v.dump();
  for (auto &ch : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-' || ch == '+' || ch == '_';
    if (!ok) ch = '_';
  }
  return s;
}

// Axis value in the results table: numbers as written, frequencies in rad/s.
std::string csv_value(const nlohmann::json &v)
{
  if (v.is_number()) return v.dump();
  if (v.is_object() && v.size() == 1) {
    try {
      return format_double(parse_frequency(v, "sweep value"));
    } catch (const std::exception &) {
    }
  }
  std::string s = v.dump();
  std::string quoted = "\"";
  for (char ch : s) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return quoted + "\"";
}

} // namespace

Trajectory run_realization(const RunConfig &config, std::uint64_t seed)
{
  if (config.mode != RunMode::MeanField) throw std::invalid_argument("run_realization: meanfield configuration expected");
  const auto ensemble = sample_ensemble(config.params, config.ensemble.n_classes, seed, config.ensemble.sampling);
  auto traj = config.ideal ? simulate_ideal_init(ensemble, config.params, *config.ideal, config.integrator, config.record)
                           : simulate(ensemble, config.params, config.pulses, config.integrator, config.record);
  traj.meta["ensemble_seed"] = seed;
  return traj;
}

AveragedRun run_averaged(const RunConfig &config, std::size_t realizations, std::uint64_t base_seed,
                         bool keep_realizations)
{
  if (realizations == 0) throw std::invalid_argument("run_averaged: need at least one realization");
  std::vector<Trajectory> runs(realizations);
  std::vector<std::exception_ptr> errors(realizations);
  tbb::parallel_for(std::size_t{0}, realizations, [&](std::size_t i) {
    try {
      runs[i] = run_realization(config, base_seed + i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  // Report the lowest failing seed so the outcome does not depend on scheduling.
  for (std::size_t i = 0; i < realizations; ++i) {
    if (!errors[i]) continue;
    const auto seed = base_seed + i;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const NumericalInstability &e) {
      throw NumericalInstability(e.step(), e.time(), "realization with seed " + std::to_string(seed) + ": " + e.what());
    } catch (const std::invalid_argument &e) {
      throw ConfigError("realization with seed " + std::to_string(seed) + ": " + e.what());
    } catch (const std::exception &e) {
      throw RealizationError(seed, "realization with seed " + std::to_string(seed) + ": " + e.what());
    }
  }

  AveragedRun out;
  const auto &first = runs.front();
  const std::size_t n = first.size();
  std::vector<double> photons(n, 0.0), re(n, 0.0), im(n, 0.0);
  for (const auto &r : runs) {
    if (r.size() != n) throw std::logic_error("run_averaged: realizations have different sample counts");
    for (std::size_t t = 0; t < n; ++t) {
      photons[t] += r.photon_number[t];
      re[t] += r.alpha_re[t];
      im[t] += r.alpha_im[t];
    }
  }
  const double inv = 1.0 / static_cast<double>(realizations);
  out.mean.times = first.times;
  out.mean.photon_number.resize(n);
  out.mean.alpha_re.resize(n);
  out.mean.alpha_im.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    out.mean.photon_number[t] = realizations == 1 ? photons[t] : photons[t] * inv;
    out.mean.alpha_re[t] = realizations == 1 ? re[t] : re[t] * inv;
    out.mean.alpha_im[t] = realizations == 1 ? im[t] : im[t] * inv;
  }
  // Bloch records are per class of one ensemble; keep the first realization's.
  out.mean.bloch = first.bloch;
  out.mean.meta = first.meta;
  out.mean.meta.erase("ensemble_seed");
  out.mean.meta["realizations"] = realizations;
  out.mean.meta["base_seed"] = base_seed;
  out.mean.meta["averaged"] = "pointwise mean of |alpha|^2; alpha columns hold the mean complex field";
  for (std::size_t i = 0; i < realizations; ++i) out.seeds.push_back(base_seed + i);
  if (keep_realizations) out.realizations = std::move(runs);
  return out;
}

AveragedRun run_averaged(const RunConfig &config)
{
  return run_averaged(config, config.averaging.realizations, config.averaging.base_seed,
                      config.averaging.keep_realizations);
}

EchoSettings settings_within_run(const PulseSequence &pulses, EchoSettings settings, double t_last)
{
  const double t_ref = pulses.empty() ? 0.0 : pulses.pulses().front().t_start;
  const int fit = static_cast<int>(std::floor((t_last - t_ref) / settings.tau)) - 1;
  if (fit < 1) throw ConfigError("analysis: the run ends before the first echo at t_ref + 2 tau");
  settings.max_order = std::min(settings.max_order, fit);
  return settings;
}

RunResult execute(const RunConfig &config)
{
  RunResult res;
  switch (config.mode) {
  case RunMode::MeanField: {
    auto avg = run_averaged(config);
    res.trajectory = std::move(avg.mean);
    res.realizations = std::move(avg.realizations);
    if (config.analysis && !config.ideal) {
      const auto settings = settings_within_run(config.pulses, *config.analysis, res.trajectory.times.back());
      res.echoes = detect_echoes(res.trajectory, config.pulses, settings, config.params.kappa);
    }
    break;
  }
  case RunMode::Linear: {
    const auto &a = config.analytic;
    const auto ensemble =
        sample_ensemble(a.params.physical(), config.ensemble.n_classes, config.ensemble.seed, config.ensemble.sampling);
    res.trajectory = simulate_linear_hp(a.params, ensemble, analytic_t_end(a), config.integrator, config.record);
    break;
  }
  case RunMode::Analytic: {
    const auto &a = config.analytic;
    const bool lorentzian = a.params.shape == Distribution::Lorentzian;
    if (lorentzian) {
      res.regime = classify_regime(a.params);
      res.trajectory = closed_form_trajectory(a.params, analytic_t_end(a), a.stride, a.normalization);
    }
    if (a.inversion) {
      res.inversion = invert_spectrum(a.params, analytic_t_end(a), *a.inversion);
      if (!lorentzian) res.trajectory = *res.inversion;
    } else if (!lorentzian) {
      throw ConfigError("analytic: the closed form needs a Lorentzian line; add analytic.inversion for other shapes");
    }
    if (a.scaling) {
      if (!lorentzian) throw ConfigError("analytic.scaling: the closed form needs a Lorentzian line");
      std::vector<std::pair<double, double>> pts;
      for (const auto &s : superradiant_scaling(a.params, log_space(a.scaling->n_min, a.scaling->n_max, a.scaling->count)))
        pts.emplace_back(s.n_spins, s.peak);
      res.scaling = fit_power_law(pts);
    }
    break;
  }
  }
  return res;
}

SweepSpec sweep_spec_from_config(const RunConfig &config)
{
  SweepSpec s;
  s.name = config.name;
  s.base = to_json(config);
  s.base.erase("sweep");
  s.axes = config.sweep.axes;
  s.realizations = config.averaging.realizations;
  s.base_seed = config.averaging.base_seed;
  s.max_cells = config.sweep.max_cells;
  return s;
}

std::vector<SweepCell> expand_sweep(const SweepSpec &spec)
{
  std::size_t total = 1;
  for (const auto &a : spec.axes) {
    if (a.values.empty()) throw ConfigError("sweep axis '" + a.path + "' has no values");
    if (total > spec.max_cells / a.values.size() + 1) total = spec.max_cells + 1;
    else total *= a.values.size();
  }
  if (total > spec.max_cells) {
    std::ostringstream msg;
    msg << "sweep has more cells than the budget max_cells = " << spec.max_cells;
    throw ConfigError(msg.str());
  }

  std::vector<SweepCell> cells(total);
  for (std::size_t c = 0; c < total; ++c) {
    auto &cell = cells[c];
    cell.index = c;
    cell.config = spec.base;
    // Mixed-radix digits with the first axis most significant.
    std::size_t rest = c;
    std::vector<std::size_t> digit(spec.axes.size());
    for (std::size_t a = spec.axes.size(); a-- > 0;) {
      digit[a] = rest % spec.axes[a].values.size();
      rest /= spec.axes[a].values.size();
    }
    std::string key;
    for (std::size_t a = 0; a < spec.axes.size(); ++a) {
      const auto &axis = spec.axes[a];
      const auto &v = axis.values[digit[a]];
      set_json_path(cell.config, axis.path, v);
      cell.coordinates[axis.path] = v;
      if (!key.empty()) key += "__";
      key += axis.path + "=" + key_value(v);
    }
    cell.key = key.empty() ? "base" : key;
    if (cell.config.contains("averaging")) {
      cell.config["averaging"]["realizations"] = spec.realizations;
      cell.config["averaging"]["base_seed"] = spec.base_seed;
    }
  }
  return cells;
}

std::vector<SweepCell> run_sweep(const SweepSpec &spec)
{
  auto cells = expand_sweep(spec);
  tbb::parallel_for(std::size_t{0}, cells.size(), [&](std::size_t i) {
    auto &cell = cells[i];
    try {
      const auto cfg = config_from_json(cell.config);
      cell.config = to_json(cfg);
      cell.result = execute(cfg);
    } catch (...) {
      const auto e = std::current_exception();
      cell.error = failure_text(e);
      cell.error_code = exit_code_for(e);
    }
  });
  return cells;
}

nlohmann::json sweep_table_json(const SweepSpec &spec, const std::vector<SweepCell> &cells)
{
  nlohmann::json rows = nlohmann::json::array();
  for (const auto &c : cells) {
    nlohmann::json row = {{"cell", c.key}, {"coordinates", c.coordinates}};
    if (!c.error.empty()) {
      row["error"] = c.error;
      row["error_code"] = c.error_code;
    } else if (c.result && c.result->echoes) {
      const auto &r = *c.result->echoes;
      row["echoes"] = to_json(r)["echoes"];
      row["n_echoes"] = r.echoes.size();
      row["decay_rate"] = r.time_fit ? nlohmann::json(r.time_fit->b) : nlohmann::json(nullptr);
    }
    if (c.result) {
      double peak = 0.0;
      for (double v : c.result->trajectory.photon_number) peak = std::max(peak, v);
      row["peak_photons"] = peak;
      if (c.result->regime) row["regime"] = std::string(to_string(c.result->regime->regime));
    }
    rows.push_back(row);
  }
  nlohmann::json axes = nlohmann::json::array();
  for (const auto &a : spec.axes) axes.push_back({{"path", a.path}, {"values", a.values}});
  return {{"sweep", spec.name}, {"axes", axes}, {"cells", rows}};
}

std::string sweep_table_csv(const SweepSpec &spec, const std::vector<SweepCell> &cells)
{
  std::size_t max_echoes = 0;
  for (const auto &c : cells) {
    if (c.result && c.result->echoes) max_echoes = std::max(max_echoes, c.result->echoes->echoes.size());
  }
  std::ostringstream out;
  out << "cell";
  for (const auto &a : spec.axes) out << ',' << a.path;
  out << ",peak_photons,n_echoes";
  for (std::size_t k = 1; k <= max_echoes; ++k) out << ",t_peak_" << k << ",a_echo_" << k;
  out << ",decay_rate,error\n";
  for (const auto &c : cells) {
    out << c.key;
    for (const auto &a : spec.axes) {
      out << ',' << csv_value(c.coordinates.at(a.path));
    }
    double peak = 0.0;
    if (c.result) {
      for (double v : c.result->trajectory.photon_number) peak = std::max(peak, v);
    }
    out << ',' << (c.result ? format_double(peak) : "");
    const EchoReport *r = c.result && c.result->echoes ? &*c.result->echoes : nullptr;
    out << ',' << (r ? std::to_string(r->echoes.size()) : "");
    for (std::size_t k = 0; k < max_echoes; ++k) {
      if (r && k < r->echoes.size())
        out << ',' << format_double(r->echoes[k].t_peak) << ',' << format_double(r->echoes[k].photons);
      else
        out << ",,";
    }
    out << ',' << (r && r->time_fit ? format_double(r->time_fit->b) : "");
    std::string err = c.error;
    for (auto &ch : err) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    out << ',' << err << '\n';
  }
  return out.str();
}

} // namespace echotrain
