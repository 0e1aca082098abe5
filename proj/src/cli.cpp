#include "echotrain/cli.hpp"

#include "echotrain/config.hpp"
#include "echotrain/output.hpp"
#include "echotrain/runner.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>

namespace echotrain {

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::optional<std::uint64_t> nk;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<std::uint64_t> realizations;
};

fs::path default_out(const std::string &name)
{
  const char *env = std::getenv("ECHOTRAIN_OUT");
  const fs::path base = env && *env ? fs::path(env) : fs::path("out");
  return base / name;
}

RunConfig load_with(const fs::path &path, const std::string &mode, const Overrides &o)
{
  nlohmann::json j;
  try {
    j = read_json(path);
  } catch (const std::runtime_error &e) {
    throw ConfigError(e.what());
  }
  if (!j.is_object()) throw ConfigError(path.string() + ": configuration must be a JSON object");
  if (!mode.empty()) {
    if (j.contains("mode") && j["mode"] != mode && !(mode == "linear" && j["mode"] == "analytic") &&
        !(mode == "analytic" && j["mode"] == "linear"))
      throw ConfigError(path.string() + ": mode \"" + j["mode"].dump() + "\" cannot run as " + mode);
    j["mode"] = mode;
  }
  if (o.nk) set_json_path(j, "ensemble.n_classes", *o.nk);
  if (o.seed) {
    set_json_path(j, "ensemble.seed", *o.seed);
    if (j.contains("averaging")) j["averaging"].erase("base_seed");
  }
  if (o.dt) set_json_path(j, "integrator.dt", *o.dt);
  if (o.realizations) set_json_path(j, "averaging.realizations", *o.realizations);
  try {
    return config_from_json(j);
  } catch (const ConfigError &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string joined(const std::vector<std::string> &args)
{
  std::string s;
  for (const auto &a : args) {
    if (!s.empty()) s += ' ';
    s += a;
  }
  return s;
}

void add_overrides(CLI::App *cmd, Overrides &o, bool meanfield)
{
  cmd->add_option("--nk", o.nk, "number of frequency classes")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "ensemble seed (realization i uses seed + i)");
  cmd->add_option("--dt", o.dt, "integrator step in seconds")->check(CLI::PositiveNumber);
  if (meanfield) cmd->add_option("--realizations", o.realizations, "number of averaged realizations")->check(CLI::PositiveNumber);
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err)
{
  CLI::App app{"Mean-field and linear-theory simulator for cavity-coupled spin echo trains"};
  app.set_version_flag("--version", std::string(code_version()));
  app.require_subcommand(1);

  std::string config_path, out_dir, in_dir, svg_path, kind = "auto";
  Overrides ov;
  bool svg = false, regime_only = false, scaling = false, keep = false;
  std::optional<double> window_frac, guard, noise_floor;
  std::optional<int> max_order;

  auto *simulate = app.add_subcommand("simulate", "nonlinear mean-field run with echo analysis");
  simulate->add_option("--config", config_path, "JSON configuration")->required();
  simulate->add_option("--out", out_dir, "output directory (default $ECHOTRAIN_OUT/<name> or out/<name>)");
  add_overrides(simulate, ov, true);
  simulate->add_flag("--svg", svg, "also write SVG plots");
  simulate->add_flag("--keep-realizations", keep, "write every realization under realizations/");

  auto *linear = app.add_subcommand("linear", "linear oscillator model in the time domain");
  linear->add_option("--config", config_path, "JSON configuration")->required();
  linear->add_option("--out", out_dir, "output directory");
  add_overrides(linear, ov, false);
  linear->add_flag("--svg", svg, "also write SVG plots");

  auto *analytic = app.add_subcommand("analytic", "closed-form first echo, regime and scaling");
  analytic->add_option("--config", config_path, "JSON configuration")->required();
  analytic->add_option("--out", out_dir, "output directory");
  analytic->add_flag("--regime", regime_only, "print the regime report and exit");
  analytic->add_flag("--scaling", scaling, "fit the N scaling of the peak (default range if not configured)");
  analytic->add_flag("--svg", svg, "also write SVG plots");

  auto *sweep = app.add_subcommand("sweep", "cartesian parameter sweep of averaged runs");
  sweep->add_option("--config", config_path, "JSON configuration with a sweep block")->required();
  sweep->add_option("--out", out_dir, "root directory (default $ECHOTRAIN_OUT/<name> or out/<name>)");
  sweep->add_flag("--svg", svg, "also write SVG plots per cell");

  auto *analyze = app.add_subcommand("analyze", "repeat echo analysis on a stored run");
  analyze->add_option("--in", in_dir, "run directory")->required();
  analyze->add_option("--window-frac", window_frac, "window half-width in units of tau");
  analyze->add_option("--max-order", max_order, "highest echo order");
  analyze->add_option("--guard", guard, "ring-down guard after pulses in seconds");
  analyze->add_option("--noise-floor", noise_floor, "floor relative to the largest echo peak");

  auto *plot = app.add_subcommand("plot", "render a stored run as SVG");
  plot->add_option("--in", in_dir, "run directory")->required();
  plot->add_option("--out", svg_path, "SVG file")->required();
  plot->add_option("--kind", kind, "auto, photons, bloch, echoes or scaling")
      ->check(CLI::IsMember({"auto", "photons", "bloch", "echoes", "scaling"}));

  try {
    std::vector<std::string> rest(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rest);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  const std::string command = joined(args);
  try {
    if (simulate->parsed()) {
      auto cfg = load_with(config_path, "meanfield", ov);
      if (keep) cfg.averaging.keep_realizations = true;
      const fs::path dir = out_dir.empty() ? default_out(cfg.name) : fs::path(out_dir);
      const auto result = execute(cfg);
      RunInfo info{command, {}};
      for (std::size_t i = 0; i < cfg.averaging.realizations; ++i) info.seeds.push_back(cfg.averaging.base_seed + i);
      write_run(dir, cfg, result, info, svg);
      out << "wrote " << dir.string();
      if (result.echoes) out << " (" << result.echoes->echoes.size() << " echoes)";
      out << '\n';
    } else if (linear->parsed() || analytic->parsed()) {
      const bool lin = linear->parsed();
      auto cfg = load_with(config_path, lin ? "linear" : "analytic", ov);
      if (!lin && regime_only) {
        const auto r = classify_regime(cfg.analytic.params);
        out << to_string(r.regime) << '\n';
        err << to_json(r).dump(2) << '\n';
        return 0;
      }
      if (!lin && scaling && !cfg.analytic.scaling) cfg.analytic.scaling = ScalingRange{};
      const fs::path dir = out_dir.empty() ? default_out(cfg.name) : fs::path(out_dir);
      const auto result = execute(cfg);
      RunInfo info{command, {}};
      if (lin) info.seeds.push_back(cfg.ensemble.seed);
      write_run(dir, cfg, result, info, svg);
      out << "wrote " << dir.string();
      if (result.regime) out << " (" << to_string(result.regime->regime) << ")";
      if (result.scaling) out << " b = " << result.scaling->b;
      out << '\n';
    } else if (sweep->parsed()) {
      const auto cfg = load_with(config_path, "", ov);
      const auto spec = sweep_spec_from_config(cfg);
      const fs::path root = out_dir.empty() ? default_out(cfg.name) : fs::path(out_dir);
      const auto cells = run_sweep(spec);
      write_sweep(root, spec, cells, RunInfo{command, {}}, svg);
      int code = 0;
      for (const auto &c : cells) {
        if (c.error.empty()) continue;
        err << "cell " << c.key << ": " << c.error << '\n';
        code = 1;
      }
      out << "wrote " << cells.size() << " cells under " << root.string() << '\n';
      return code;
    } else if (analyze->parsed()) {
      std::optional<EchoSettings> settings;
      if (window_frac || max_order || guard || noise_floor) {
        const auto cfg = config_from_json(read_json(fs::path(in_dir) / "meta.json"));
        if (!cfg.analysis) throw ConfigError("analyze: the stored run has no echo analysis settings");
        EchoSettings s = *cfg.analysis;
        if (window_frac) s.window_frac = *window_frac;
        if (max_order) s.max_order = *max_order;
        if (guard) s.guard = *guard;
        if (noise_floor) s.noise_floor = *noise_floor;
        try {
          s.validate();
        } catch (const std::invalid_argument &e) {
          throw ConfigError(e.what());
        }
        settings = s;
      }
      const auto report = analyze_run(in_dir, settings);
      out << report.echoes.size() << " echoes";
      if (report.time_fit) out << ", b = " << report.time_fit->b << " rad/s";
      out << '\n';
    } else if (plot->parsed()) {
      plot_run(in_dir, svg_path, parse_plot_kind(kind));
      out << "wrote " << svg_path << '\n';
    }
  } catch (...) {
    const auto e = std::current_exception();
    try {
      std::rethrow_exception(e);
    } catch (const std::exception &x) {
      err << "error: " << x.what() << '\n';
    } catch (...) {
      err << "error: unknown failure\n";
    }
    return exit_code_for(e);
  }
  return 0;
}

} // namespace echotrain
