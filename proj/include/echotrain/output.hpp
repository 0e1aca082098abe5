#pragma once

#include "echotrain/config.hpp"
#include "echotrain/runner.hpp"
#include "echotrain/svg_plot.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace echotrain {

/// Provenance recorded next to the resolved configuration in meta.json.
struct RunInfo {
  std::string command;
  std::vector<std::uint64_t> seeds;
};

/// Resolved configuration plus a "run_info" block; reloads as a config.
nlohmann::json meta_json(const RunConfig &config, const RunInfo &info);

/// Writes one run into dir (created if needed):
///   trajectory.csv, bloch_<k>.csv, realizations/trajectory_<seed>.csv,
///   echoes.json + echoes.csv, regime.json, scaling.json, inversion.csv,
///   meta.json; with svg also photons.svg, bloch.svg, echoes.svg, scaling.svg.
void write_run(const std::filesystem::path &dir, const RunConfig &config, const RunResult &result,
               const RunInfo &info, bool svg);

/// Writes <root>/<cell-key>/... for every successful cell plus
/// <root>/results.csv and <root>/results.json.
void write_sweep(const std::filesystem::path &root, const SweepSpec &spec, const std::vector<SweepCell> &cells,
                 const RunInfo &info, bool svg);

/// Reloads meta.json and trajectory.csv from a run directory and repeats the
/// echo analysis, optionally with replaced settings; rewrites echoes.json and
/// echoes.csv. Missing or malformed files raise std::runtime_error naming the file.
EchoReport analyze_run(const std::filesystem::path &dir, const std::optional<EchoSettings> &settings = std::nullopt);

enum class PlotKind { Auto, Photons, Bloch, Echoes, Scaling };

/// Picks a plot for a run directory: "photons", "bloch", "echoes", "scaling",
/// or "auto" (scaling if present, else echoes if any were found, else photons).
PlotKind parse_plot_kind(std::string_view name);
void plot_run(const std::filesystem::path &dir, const std::filesystem::path &svg, PlotKind kind);

std::string read_text(const std::filesystem::path &path);
nlohmann::json read_json(const std::filesystem::path &path);
void write_text(const std::filesystem::path &path, const std::string &text);

} // namespace echotrain
