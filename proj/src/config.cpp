#include "echotrain/config.hpp"

#include "echotrain/units.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#ifndef ECHOTRAIN_VERSION
#define ECHOTRAIN_VERSION "unknown"
#endif

namespace echotrain {

using nlohmann::json;

namespace {

json freq(double rad_s) { return {{"rad_s", rad_s}}; }

// Integers written by nlohmann as signed still count when non-negative.
bool is_count(const json &v)
{
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// Typed access to one JSON object with unknown-key rejection.
class Section {
public:
  Section(const json &j, std::string where, std::set<std::string> allowed)
    : j_(j)
    , where_(std::move(where))
  {
    if (!j.is_object()) fail("", "expected an object");
    for (const auto &[key, _] : j.items()) {
      if (!allowed.contains(key)) fail(key, "unknown key");
    }
  }

  bool has(const std::string &key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json &raw(const std::string &key) const
  {
    if (!has(key)) fail(key, "required key missing");
    return j_.at(key);
  }
  std::string path(const std::string &key) const { return where_.empty() ? key : where_ + "." + key; }

  double number(const std::string &key) const
  {
    const auto &v = raw(key);
    if (!v.is_number()) fail(key, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key, "not finite");
    return x;
  }
  double number(const std::string &key, double fallback) const { return has(key) ? number(key) : fallback; }

  double frequency(const std::string &key) const
  {
    try {
      return parse_frequency(raw(key), path(key));
    } catch (const ConfigError &) {
      throw;
    } catch (const std::exception &e) {
      fail(key, e.what());
    }
  }
  double frequency(const std::string &key, double fallback) const { return has(key) ? frequency(key) : fallback; }

  std::uint64_t unsigned_integer(const std::string &key, std::uint64_t fallback) const
  {
    if (!has(key)) return fallback;
    const auto &v = raw(key);
    if (!is_count(v)) fail(key, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::string string(const std::string &key, const std::string &fallback) const
  {
    if (!has(key)) return fallback;
    const auto &v = raw(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  bool boolean(const std::string &key, bool fallback) const
  {
    if (!has(key)) return fallback;
    const auto &v = raw(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }

  Section child(const std::string &key, std::set<std::string> allowed) const
  {
    return Section(raw(key), path(key), std::move(allowed));
  }

  [[noreturn]] void fail(const std::string &key, const std::string &what) const
  {
    const std::string p = key.empty() ? (where_.empty() ? "<root>" : where_) : path(key);
    throw ConfigError(p + ": " + what);
  }

private:
  const json &j_;
  std::string where_;
};

// Wraps a domain parse/validation failure as a ConfigError for `where`.
template <class F> auto guarded(const std::string &where, F &&f)
{
  try {
    return f();
  } catch (const ConfigError &) {
    throw;
  } catch (const std::exception &e) {
    throw ConfigError(where + ": " + e.what());
  }
}

PhysicalParams read_params(const Section &s)
{
  PhysicalParams p;
  p.kappa = s.frequency("kappa");
  p.gamma = s.frequency("gamma", 0.0);
  p.dephasing = s.frequency("dephasing", 0.0);
  p.g_single = s.frequency("g_single");
  p.n_spins = s.number("n_spins");
  p.delta_c = s.frequency("delta_c", 0.0);
  p.inhomogeneous_fwhm = s.frequency("inhomogeneous_fwhm");
  p.distribution = guarded(s.path("distribution"), [&] { return parse_distribution(s.string("distribution", "gaussian")); });
  guarded("params", [&] {
    p.validate();
    return 0;
  });
  return p;
}

HahnTiming read_hahn(const Section &s)
{
  HahnTiming h;
  h.tau = s.number("tau");
  h.t1 = s.number("t1", h.t1);
  h.d1 = s.number("d1", h.d1);
  h.d2 = s.number("d2", h.d2);
  h.amplitude = s.frequency("amplitude", h.amplitude);
  h.phase1 = s.number("phase1", h.phase1);
  h.phase2 = s.number("phase2", h.phase2);
  h.t_end = s.number("t_end");
  return h;
}

AnalyticSettings read_analytic(const Section &s)
{
  AnalyticSettings a;
  auto &p = a.params;
  p.beta = s.number("beta", 1.0);
  p.n_spins = s.number("n_spins");
  p.g_eff = s.frequency("g_eff");
  p.kappa = s.frequency("kappa");
  p.gamma_hp = s.frequency("gamma_hp", 0.0);
  p.tau = s.number("tau");
  p.shape = guarded(s.path("shape"), [&] { return parse_distribution(s.string("shape", "lorentzian")); });
  p.width = s.frequency("width");
  p.delta_c = s.frequency("delta_c", 0.0);
  guarded("analytic", [&] {
    p.validate();
    return 0;
  });
  a.t_end = s.number("t_end", 0.0);
  a.stride = s.number("stride", a.stride);
  if (!(a.stride > 0.0)) s.fail("stride", "must be positive");
  if (a.t_end < 0.0) s.fail("t_end", "must be non-negative");
  const auto norm = s.string("normalization", "physical");
  if (norm == "physical")
    a.normalization = FieldNormalization::Physical;
  else if (norm == "unscaled")
    a.normalization = FieldNormalization::Unscaled;
  else
    s.fail("normalization", "expected \"physical\" or \"unscaled\"");
  if (s.has("scaling")) {
    const auto sc = s.child("scaling", {"n_min", "n_max", "count"});
    ScalingRange r;
    r.n_min = sc.number("n_min", r.n_min);
    r.n_max = sc.number("n_max", r.n_max);
    r.count = sc.unsigned_integer("count", r.count);
    if (!(r.n_min >= 1.0 && r.n_max > r.n_min && r.count >= 3))
      sc.fail("", "need 1 <= n_min < n_max and count >= 3");
    a.scaling = r;
  }
  if (s.has("inversion")) {
    const auto inv = s.child("inversion", {"points", "period", "eta"});
    InversionSettings is;
    is.points = inv.unsigned_integer("points", is.points);
    is.period = inv.number("period", is.period);
    is.eta = inv.number("eta", is.eta);
    if (is.points < 16) inv.fail("points", "must be at least 16");
    a.inversion = is;
  }
  return a;
}

json to_json_analytic(const AnalyticSettings &a)
{
  const auto &p = a.params;
  json j = {{"beta", p.beta},
            {"n_spins", p.n_spins},
            {"g_eff", freq(p.g_eff)},
            {"kappa", freq(p.kappa)},
            {"gamma_hp", freq(p.gamma_hp)},
            {"tau", p.tau},
            {"shape", std::string(to_string(p.shape))},
            {"width", freq(p.width)},
            {"delta_c", freq(p.delta_c)},
            {"t_end", a.t_end},
            {"stride", a.stride},
            {"normalization", a.normalization == FieldNormalization::Physical ? "physical" : "unscaled"}};
  if (a.scaling) j["scaling"] = {{"n_min", a.scaling->n_min}, {"n_max", a.scaling->n_max}, {"count", a.scaling->count}};
  if (a.inversion)
    j["inversion"] = {{"points", a.inversion->points}, {"period", a.inversion->period}, {"eta", a.inversion->eta}};
  return j;
}

} // namespace

std::string_view code_version() { return ECHOTRAIN_VERSION; }

std::string_view to_string(RunMode m)
{
  switch (m) {
  case RunMode::MeanField: return "meanfield";
  case RunMode::Linear: return "linear";
  case RunMode::Analytic: return "analytic";
  }
  return "meanfield";
}

double parse_frequency(const json &j, std::string_view where)
{
  const std::string w(where);
  if (j.is_number())
    throw ConfigError(w + ": bare number; write the unit as {\"hz\": f}, {\"two_pi_hz\": f} or {\"rad_s\": x}");
  if (!j.is_object() || j.size() != 1)
    throw ConfigError(w + ": expected exactly one of {\"hz\": f}, {\"two_pi_hz\": f}, {\"rad_s\": x}");
  const auto &[unit, value] = *j.items().begin();
  if (!value.is_number()) throw ConfigError(w + ": frequency value must be a number");
  const double x = value.get<double>();
  if (!std::isfinite(x)) throw ConfigError(w + ": frequency is not finite");
  if (unit == "hz" || unit == "two_pi_hz") return from_hz(x);
  if (unit == "rad_s") return x;
  throw ConfigError(w + ": unknown frequency unit '" + unit + "'");
}

void set_json_path(json &j, std::string_view dotted, const json &value)
{
  if (dotted.empty()) throw ConfigError("sweep axis: empty parameter path");
  json *node = &j;
  std::size_t pos = 0;
  for (;;) {
    const auto dot = dotted.find('.', pos);
    const std::string key(dotted.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos));
    if (key.empty()) throw ConfigError("sweep axis '" + std::string(dotted) + "': empty path component");
    if (!node->is_object()) throw ConfigError("sweep axis '" + std::string(dotted) + "': '" + key + "' is not inside an object");
    if (dot == std::string_view::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    pos = dot + 1;
  }
}

RunConfig config_from_json(const json &j)
{
  const Section root(j, "",
                     {"name", "mode", "params", "ensemble", "pulses", "ideal_init", "integrator", "record", "analysis",
                      "averaging", "sweep", "analytic", "run_info"});
  RunConfig c;
  c.name = root.string("name", c.name);
  if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos) root.fail("name", "must be a plain, non-empty name");

  const auto mode = root.string("mode", "meanfield");
  if (mode == "meanfield")
    c.mode = RunMode::MeanField;
  else if (mode == "linear")
    c.mode = RunMode::Linear;
  else if (mode == "analytic")
    c.mode = RunMode::Analytic;
  else
    root.fail("mode", "expected \"meanfield\", \"linear\" or \"analytic\"");

  if (root.has("params")) {
    c.params = read_params(root.child("params", {"kappa", "gamma", "dephasing", "g_single", "n_spins", "delta_c",
                                                 "inhomogeneous_fwhm", "distribution"}));
  }
  if (root.has("ensemble")) {
    const auto s = root.child("ensemble", {"n_classes", "seed", "sampling"});
    c.ensemble.n_classes = s.unsigned_integer("n_classes", c.ensemble.n_classes);
    c.ensemble.seed = s.unsigned_integer("seed", c.ensemble.seed);
    c.ensemble.sampling = guarded(s.path("sampling"), [&] { return parse_sampling(s.string("sampling", "iid")); });
    if (c.ensemble.n_classes == 0) s.fail("n_classes", "must be at least 1");
  }
  if (root.has("pulses")) {
    const auto s = root.child("pulses", {"hahn", "sequence", "t_end"});
    if (s.has("hahn") == s.has("sequence")) s.fail("", "give exactly one of \"hahn\" or \"sequence\"");
    if (s.has("hahn")) {
      if (s.has("t_end")) s.fail("t_end", "belongs inside \"hahn\"");
      c.hahn = read_hahn(s.child("hahn", {"tau", "t1", "d1", "d2", "amplitude", "phase1", "phase2", "t_end"}));
      c.pulses = guarded(s.path("hahn"), [&] { return hahn_sequence(*c.hahn); });
    } else {
      const auto &arr = s.raw("sequence");
      if (!arr.is_array()) s.fail("sequence", "expected an array of pulses");
      std::vector<Pulse> pulses;
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const Section p(arr[i], s.path("sequence") + "[" + std::to_string(i) + "]",
                        {"t_start", "duration", "amplitude", "phase"});
        pulses.push_back(Pulse{p.number("t_start"), p.number("duration"), p.frequency("amplitude"), p.number("phase", 0.0)});
      }
      const double t_end = s.number("t_end");
      c.pulses = guarded(s.path("sequence"), [&] { return PulseSequence(std::move(pulses), t_end); });
    }
  }
  if (root.has("ideal_init")) {
    const auto s = root.child("ideal_init", {"tau", "beta", "t_end"});
    IdealInit ii;
    ii.tau = s.number("tau");
    ii.beta = s.number("beta", 1.0);
    ii.t_end = s.number("t_end");
    if (!(ii.beta > 0.0 && ii.beta <= 1.0)) s.fail("beta", "must lie in (0, 1]");
    if (!(ii.tau >= 0.0) || !(ii.t_end >= 2.0 * ii.tau) || !(ii.t_end > 0.0)) s.fail("t_end", "must be at least 2 tau");
    c.ideal = ii;
  }
  if (root.has("integrator")) {
    const auto s = root.child("integrator", {"dt", "scheme", "c_stab", "tolerance"});
    c.integrator.dt = s.number("dt", c.integrator.dt);
    c.integrator.scheme = guarded(s.path("scheme"), [&] { return parse_scheme(s.string("scheme", "rk4")); });
    c.integrator.c_stab = s.number("c_stab", c.integrator.c_stab);
    c.integrator.tolerance = s.number("tolerance", c.integrator.tolerance);
    if (c.integrator.dt < 0.0) s.fail("dt", "must be non-negative");
    if (!(c.integrator.c_stab > 0.0)) s.fail("c_stab", "must be positive");
    if (!(c.integrator.tolerance > 0.0)) s.fail("tolerance", "must be positive");
  }
  if (root.has("record")) {
    const auto s = root.child("record", {"stride", "bloch_classes"});
    c.record.stride = s.number("stride", c.record.stride);
    if (!(c.record.stride > 0.0)) s.fail("stride", "must be positive");
    if (s.has("bloch_classes")) {
      const auto &arr = s.raw("bloch_classes");
      if (!arr.is_array()) s.fail("bloch_classes", "expected an array of class indices");
      for (const auto &v : arr) {
        if (!is_count(v)) s.fail("bloch_classes", "class indices must be non-negative integers");
        c.record.bloch_classes.push_back(v.get<std::size_t>());
      }
      if (c.record.bloch_classes.size() > max_bloch_classes)
        s.fail("bloch_classes", "at most " + std::to_string(max_bloch_classes) + " classes");
    }
  }

  if (root.has("averaging")) {
    const auto s = root.child("averaging", {"realizations", "base_seed", "keep_realizations"});
    c.averaging.realizations = s.unsigned_integer("realizations", 1);
    c.averaging.base_seed = s.unsigned_integer("base_seed", c.ensemble.seed);
    c.averaging.keep_realizations = s.boolean("keep_realizations", false);
    if (c.averaging.realizations == 0) s.fail("realizations", "must be at least 1");
  } else {
    c.averaging.base_seed = c.ensemble.seed;
  }

  if (root.has("sweep")) {
    const auto s = root.child("sweep", {"axes", "max_cells"});
    c.sweep.max_cells = s.unsigned_integer("max_cells", c.sweep.max_cells);
    if (s.has("axes")) {
      const auto &arr = s.raw("axes");
      if (!arr.is_array()) s.fail("axes", "expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const Section a(arr[i], s.path("axes") + "[" + std::to_string(i) + "]", {"path", "values"});
        SweepAxis axis;
        axis.path = a.string("path", "");
        if (axis.path.empty()) a.fail("path", "required");
        if (axis.path.starts_with("sweep") || axis.path.starts_with("run_info") || axis.path == "name")
          a.fail("path", "cannot sweep this key");
        const auto &vals = a.raw("values");
        if (!vals.is_array() || vals.empty()) a.fail("values", "expected a non-empty array");
        for (const auto &v : vals) {
          if (v.is_number() && !std::isfinite(v.get<double>())) a.fail("values", "values must be finite");
          axis.values.push_back(v);
        }
        c.sweep.axes.push_back(std::move(axis));
      }
    }
  }

  if (root.has("analytic")) {
    c.analytic = read_analytic(root.child("analytic", {"beta", "n_spins", "g_eff", "kappa", "gamma_hp", "tau", "shape",
                                                       "width", "delta_c", "t_end", "stride", "normalization",
                                                       "scaling", "inversion"}));
  }

  // Mode-specific requirements.
  switch (c.mode) {
  case RunMode::MeanField:
    if (!root.has("params")) root.fail("params", "required in meanfield mode");
    if (root.has("pulses") == root.has("ideal_init"))
      root.fail("pulses", "give exactly one of \"pulses\" or \"ideal_init\" in meanfield mode");
    for (auto k : c.record.bloch_classes) {
      if (k >= c.ensemble.n_classes) root.fail("record", "Bloch class index out of range");
    }
    break;
  case RunMode::Linear:
  case RunMode::Analytic:
    if (!root.has("analytic")) root.fail("analytic", "required in linear and analytic modes");
    break;
  }

  // Echo analysis: τ from the Hahn timing unless given explicitly.
  std::optional<double> tau;
  if (c.hahn) tau = c.hahn->tau;
  if (root.has("analysis")) {
    const auto s = root.child("analysis", {"tau", "window_frac", "max_order", "guard", "noise_floor"});
    EchoSettings e;
    if (s.has("tau")) tau = s.number("tau");
    if (!tau) s.fail("tau", "required when the pulses are not a Hahn sequence");
    e.tau = *tau;
    e.window_frac = s.number("window_frac", e.window_frac);
    const auto order = s.unsigned_integer("max_order", static_cast<std::uint64_t>(e.max_order));
    if (order < 1 || order > 1000) s.fail("max_order", "must lie in [1, 1000]");
    e.max_order = static_cast<int>(order);
    e.guard = s.number("guard", e.guard);
    e.noise_floor = s.number("noise_floor", e.noise_floor);
    guarded("analysis", [&] {
      e.validate();
      return 0;
    });
    c.analysis = e;
  } else if (tau && c.mode == RunMode::MeanField) {
    EchoSettings e;
    e.tau = *tau;
    c.analysis = e;
  }
  if (c.analysis && c.mode != RunMode::MeanField) root.fail("analysis", "echo analysis applies to meanfield runs only");
  return c;
}

RunConfig load_config(const std::filesystem::path &path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

json to_json(const RunConfig &c)
{
  json j = {{"name", c.name}, {"mode", std::string(to_string(c.mode))}};
  if (c.mode == RunMode::MeanField) {
    const auto &p = c.params;
    j["params"] = {{"kappa", freq(p.kappa)},
                   {"gamma", freq(p.gamma)},
                   {"dephasing", freq(p.dephasing)},
                   {"g_single", freq(p.g_single)},
                   {"n_spins", p.n_spins},
                   {"delta_c", freq(p.delta_c)},
                   {"inhomogeneous_fwhm", freq(p.inhomogeneous_fwhm)},
                   {"distribution", std::string(to_string(p.distribution))}};
  }
  if (c.mode != RunMode::Analytic) {
    j["ensemble"] = {{"n_classes", c.ensemble.n_classes},
                     {"seed", c.ensemble.seed},
                     {"sampling", std::string(to_string(c.ensemble.sampling))}};
    j["integrator"] = to_json(c.integrator);
    j["record"] = {{"stride", c.record.stride}, {"bloch_classes", c.record.bloch_classes}};
  }
  if (c.hahn) {
    const auto &h = *c.hahn;
    j["pulses"] = {{"hahn",
                    {{"tau", h.tau},
                     {"t1", h.t1},
                     {"d1", h.d1},
                     {"d2", h.d2},
                     {"amplitude", freq(h.amplitude)},
                     {"phase1", h.phase1},
                     {"phase2", h.phase2},
                     {"t_end", h.t_end}}}};
  } else if (c.mode == RunMode::MeanField && !c.ideal) {
    json seq = json::array();
    for (const auto &p : c.pulses.pulses()) {
      seq.push_back({{"t_start", p.t_start}, {"duration", p.duration}, {"amplitude", freq(p.amplitude)}, {"phase", p.phase}});
    }
    j["pulses"] = {{"sequence", seq}, {"t_end", c.pulses.t_end()}};
  }
  if (c.ideal) j["ideal_init"] = {{"tau", c.ideal->tau}, {"beta", c.ideal->beta}, {"t_end", c.ideal->t_end}};
  if (c.analysis) {
    j["analysis"] = to_json(*c.analysis);
    // τ implied by the Hahn timing stays implied, so sweeping the timing moves the windows.
    if (c.hahn && c.analysis->tau == c.hahn->tau) j["analysis"].erase("tau");
  }
  if (c.mode == RunMode::MeanField) {
    j["averaging"] = {{"realizations", c.averaging.realizations},
                      {"base_seed", c.averaging.base_seed},
                      {"keep_realizations", c.averaging.keep_realizations}};
  }
  if (!c.sweep.axes.empty()) {
    json axes = json::array();
    for (const auto &a : c.sweep.axes) axes.push_back({{"path", a.path}, {"values", a.values}});
    j["sweep"] = {{"axes", axes}, {"max_cells", c.sweep.max_cells}};
  }
  if (c.mode != RunMode::MeanField) j["analytic"] = to_json_analytic(c.analytic);
  return j;
}

} // namespace echotrain
