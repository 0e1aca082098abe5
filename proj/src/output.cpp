#include "echotrain/output.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace echotrain {

namespace fs = std::filesystem;

std::string read_text(const fs::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path &path)
{
  const auto text = read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw std::runtime_error(path.string() + ": malformed JSON: " + e.what());
  }
}

void write_text(const fs::path &path, const std::string &text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("error writing " + path.string());
}

namespace {

void write_json(const fs::path &path, const nlohmann::json &j) { write_text(path, j.dump(2) + "\n"); }

void remove_stale(const fs::path &dir)
{
  // Files from an earlier run in the same directory would mix with this one.
  static const std::regex generated(
      R"((trajectory|inversion)\.csv|bloch_\d+\.csv|echoes\.(json|csv)|regime\.json|scaling\.json|meta\.json|(photons|bloch|echoes|scaling)\.svg)");
  if (!fs::exists(dir)) return;
  for (const auto &entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && std::regex_match(entry.path().filename().string(), generated))
      fs::remove(entry.path());
  }
  fs::remove_all(dir / "realizations");
}

std::vector<BlochSeries> read_bloch_csvs(const fs::path &dir, const std::vector<double> &times)
{
  static const std::regex name(R"(bloch_(\d+)\.csv)");
  std::vector<BlochSeries> out;
  if (!fs::exists(dir)) return out;
  for (const auto &entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const auto file = entry.path().filename().string();
    if (!std::regex_match(file, m, name)) continue;
    std::istringstream in(read_text(entry.path()));
    std::string line;
    if (!std::getline(in, line) || line != "t,sx,sy,sz")
      throw std::runtime_error(entry.path().string() + ": unexpected CSV header");
    BlochSeries b;
    b.class_index = std::stoul(m[1].str());
    std::size_t row = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      double v[4];
      std::istringstream ls(line);
      for (double &x : v) {
        std::string cell;
        if (!std::getline(ls, cell, ',')) throw std::runtime_error(entry.path().string() + ": short row");
        try {
          x = std::stod(cell);
        } catch (const std::exception &) {
          throw std::runtime_error(entry.path().string() + ": bad number '" + cell + "'");
        }
      }
      if (row >= times.size() || v[0] != times[row])
        throw std::runtime_error(entry.path().string() + ": times do not match trajectory.csv");
      b.sx.push_back(v[1]);
      b.sy.push_back(v[2]);
      b.sz.push_back(v[3]);
      ++row;
    }
    if (row != times.size()) throw std::runtime_error(entry.path().string() + ": row count differs from trajectory.csv");
    out.push_back(std::move(b));
  }
  std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) { return a.class_index < b.class_index; });
  return out;
}

void write_result_files(const fs::path &dir, const RunResult &r, const std::string &name, bool svg)
{
  write_trajectory_csv(r.trajectory, dir / "trajectory.csv");
  write_bloch_csvs(r.trajectory, dir);
  if (!r.realizations.empty()) {
    fs::create_directories(dir / "realizations");
    for (const auto &t : r.realizations) {
      const auto seed = t.meta.value("ensemble_seed", std::uint64_t{0});
      write_trajectory_csv(t, dir / "realizations" / ("trajectory_" + std::to_string(seed) + ".csv"));
    }
  }
  if (r.echoes) {
    write_json(dir / "echoes.json", to_json(*r.echoes));
    write_echo_table_csv(*r.echoes, dir / "echoes.csv");
  }
  if (r.regime) write_json(dir / "regime.json", to_json(*r.regime));
  if (r.scaling) write_json(dir / "scaling.json", to_json(*r.scaling));
  if (r.inversion) write_trajectory_csv(*r.inversion, dir / "inversion.csv");
  if (svg) {
    write_svg(photon_plot(r.trajectory, name), dir / "photons.svg");
    if (!r.trajectory.bloch.empty()) write_svg(bloch_plot(r.trajectory, name), dir / "bloch.svg");
    if (r.echoes && !r.echoes->echoes.empty()) write_svg(echo_decay_plot(*r.echoes, name), dir / "echoes.svg");
    if (r.scaling) write_svg(scaling_plot(*r.scaling, name), dir / "scaling.svg");
  }
}

EchoReport echo_report_from_json(const nlohmann::json &j)
{
  EchoReport r;
  r.settings = echo_settings_from_json(j.at("settings"));
  r.t_ref = j.at("t_ref").get<double>();
  r.guard = j.at("guard").get<double>();
  r.noise_floor = j.at("noise_floor_photons").get<double>();
  for (const auto &e : j.at("echoes")) {
    Echo x;
    x.window = {e.at("order").get<int>(), e.at("t_lo").get<double>(), e.at("t_hi").get<double>()};
    x.t_peak = e.at("t_peak").get<double>();
    x.peak = e.at("peak_photons").get<double>();
    x.photons = e.at("a_echo").get<double>();
    r.echoes.push_back(x);
  }
  auto fit = [](const nlohmann::json &f) -> std::optional<ExponentialFit> {
    if (f.is_null()) return std::nullopt;
    return ExponentialFit{f.at("a").get<double>(), f.at("b").get<double>(), f.at("rms_residual").get<double>()};
  };
  r.time_fit = fit(j.at("time_fit"));
  r.order_fit = fit(j.at("order_fit"));
  return r;
}

ScalingFit scaling_from_json(const nlohmann::json &j)
{
  ScalingFit f;
  f.a = j.at("a").get<double>();
  f.b = j.at("b").get<double>();
  f.residual = j.at("rms_residual").get<double>();
  for (const auto &p : j.at("points")) f.points.emplace_back(p.at("n").get<double>(), p.at("peak").get<double>());
  return f;
}

} // namespace

nlohmann::json meta_json(const RunConfig &config, const RunInfo &info)
{
  auto j = to_json(config);
  j["run_info"] = {{"code_version", std::string(code_version())}, {"command", info.command}, {"seeds", info.seeds}};
  return j;
}

void write_run(const fs::path &dir, const RunConfig &config, const RunResult &result, const RunInfo &info, bool svg)
{
  fs::create_directories(dir);
  remove_stale(dir);
  write_result_files(dir, result, config.name, svg);
  write_json(dir / "meta.json", meta_json(config, info));
}

void write_sweep(const fs::path &root, const SweepSpec &spec, const std::vector<SweepCell> &cells, const RunInfo &info,
                 bool svg)
{
  fs::create_directories(root);
  for (const auto &c : cells) {
    const auto dir = root / c.key;
    fs::create_directories(dir);
    remove_stale(dir);
    fs::remove(dir / "error.txt");
    if (c.result) {
      RunInfo cell_info = info;
      cell_info.seeds.clear();
      for (std::size_t i = 0; i < spec.realizations; ++i) cell_info.seeds.push_back(spec.base_seed + i);
      const auto cfg = config_from_json(c.config);
      write_result_files(dir, *c.result, cfg.name + " " + c.key, svg);
      write_json(dir / "meta.json", meta_json(cfg, cell_info));
    } else {
      write_text(dir / "error.txt", c.error + "\n");
      write_json(dir / "config.json", c.config);
    }
  }
  write_text(root / "results.csv", sweep_table_csv(spec, cells));
  write_json(root / "results.json", sweep_table_json(spec, cells));
}

EchoReport analyze_run(const fs::path &dir, const std::optional<EchoSettings> &settings)
{
  const auto meta_path = dir / "meta.json";
  RunConfig cfg;
  try {
    cfg = config_from_json(read_json(meta_path));
  } catch (const ConfigError &e) {
    throw std::runtime_error(meta_path.string() + ": " + e.what());
  }
  if (cfg.mode != RunMode::MeanField) throw std::runtime_error(meta_path.string() + ": not a meanfield run");
  const auto traj = read_trajectory_csv(dir / "trajectory.csv");
  std::optional<EchoSettings> s = settings ? settings : cfg.analysis;
  if (!s) throw std::runtime_error(meta_path.string() + ": no echo analysis settings (tau unknown)");
  const auto report = detect_echoes(traj, cfg.pulses, settings_within_run(cfg.pulses, *s, traj.times.back()),
                                    cfg.params.kappa);
  write_json(dir / "echoes.json", to_json(report));
  write_echo_table_csv(report, dir / "echoes.csv");
  return report;
}

PlotKind parse_plot_kind(std::string_view name)
{
  if (name == "auto") return PlotKind::Auto;
  if (name == "photons") return PlotKind::Photons;
  if (name == "bloch") return PlotKind::Bloch;
  if (name == "echoes") return PlotKind::Echoes;
  if (name == "scaling") return PlotKind::Scaling;
  throw std::invalid_argument("unknown plot kind '" + std::string(name) + "'");
}

void plot_run(const fs::path &dir, const fs::path &svg, PlotKind kind)
{
  if (!fs::is_directory(dir)) throw std::runtime_error(dir.string() + ": not a directory");
  std::string title = dir.filename().string();
  if (fs::exists(dir / "meta.json")) title = read_json(dir / "meta.json").value("name", title);
  if (kind == PlotKind::Auto) {
    if (fs::exists(dir / "scaling.json"))
      kind = PlotKind::Scaling;
    else if (fs::exists(dir / "echoes.json") && !read_json(dir / "echoes.json").at("echoes").empty())
      kind = PlotKind::Echoes;
    else
      kind = PlotKind::Photons;
  }
  PlotSpec spec;
  switch (kind) {
  case PlotKind::Scaling:
    spec = scaling_plot(scaling_from_json(read_json(dir / "scaling.json")), title);
    break;
  case PlotKind::Echoes:
    try {
      spec = echo_decay_plot(echo_report_from_json(read_json(dir / "echoes.json")), title);
    } catch (const nlohmann::json::exception &e) {
      throw std::runtime_error((dir / "echoes.json").string() + ": " + e.what());
    }
    break;
  case PlotKind::Bloch: {
    auto traj = read_trajectory_csv(dir / "trajectory.csv");
    traj.bloch = read_bloch_csvs(dir, traj.times);
    if (traj.bloch.empty()) throw std::runtime_error(dir.string() + ": no bloch_<k>.csv files");
    spec = bloch_plot(traj, title);
    break;
  }
  case PlotKind::Photons:
  case PlotKind::Auto:
    spec = photon_plot(read_trajectory_csv(dir / "trajectory.csv"), title);
    break;
  }
  write_svg(spec, svg);
}

} // namespace echotrain
