#pragma once

#include "echotrain/analytic_echo.hpp"
#include "echotrain/echo_analysis.hpp"
#include "echotrain/ensemble.hpp"
#include "echotrain/meanfield.hpp"
#include "echotrain/params.hpp"
#include "echotrain/pulse.hpp"
#include "echotrain/spectrum.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace echotrain {

std::string_view code_version();

/// Invalid or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class RunMode {
  MeanField, ///< nonlinear mean-field simulation with drive pulses or ideal initialization
  Linear,    ///< linear oscillator model in the time domain
  Analytic,  ///< closed-form first echo (plus optional spectrum inversion and N scaling)
};

std::string_view to_string(RunMode m);

struct EnsembleSettings {
  std::size_t n_classes = 1000;
  std::uint64_t seed = 0;
  Sampling sampling = Sampling::Independent;
};

struct AveragingSettings {
  std::size_t realizations = 1;
  std::uint64_t base_seed = 0; ///< realization i uses base_seed + i
  bool keep_realizations = false;
};

struct SweepAxis {
  std::string path; ///< dotted path into the configuration, e.g. "pulses.hahn.tau"
  std::vector<nlohmann::json> values;
};

struct SweepSettings {
  std::vector<SweepAxis> axes;
  std::size_t max_cells = 256;
};

struct ScalingRange {
  double n_min = 1e8;
  double n_max = 1e10;
  std::size_t count = 10;
};

struct AnalyticSettings {
  AnalyticEchoParams params;
  double t_end = 0.0;  ///< 0 selects 2τ
  double stride = 10e-9;
  FieldNormalization normalization = FieldNormalization::Physical;
  std::optional<ScalingRange> scaling;
  std::optional<InversionSettings> inversion;
};

/// Fully resolved run description. Frequencies are rad/s, times seconds.
struct RunConfig {
  std::string name = "run";
  RunMode mode = RunMode::MeanField;
  PhysicalParams params;
  EnsembleSettings ensemble;
  std::optional<HahnTiming> hahn;
  PulseSequence pulses;
  std::optional<IdealInit> ideal;
  IntegratorSettings integrator;
  RecordSettings record;
  /// Echo analysis; absent when no τ is known (e.g. ideal initialization
  /// without an explicit analysis.tau).
  std::optional<EchoSettings> analysis;
  AveragingSettings averaging;
  SweepSettings sweep;
  AnalyticSettings analytic;
};

/// Parses and validates a configuration document. Unknown keys, missing
/// required keys, bare numbers where a frequency is expected and invalid
/// values raise ConfigError. A top-level "run_info" object (written into
/// meta.json) is accepted and ignored, so meta.json reloads as a config.
RunConfig config_from_json(const nlohmann::json &j);
RunConfig load_config(const std::filesystem::path &path);

/// Canonical JSON form with every default filled in; frequencies are written
/// as {"rad_s": x}. config_from_json(to_json(c)) reproduces c exactly.
nlohmann::json to_json(const RunConfig &c);

/// Frequency value: {"hz": f} or {"two_pi_hz": f} (both 2πf rad/s) or
/// {"rad_s": x}.
double parse_frequency(const nlohmann::json &j, std::string_view where);

/// Replaces the value at a dotted path, creating intermediate objects.
void set_json_path(nlohmann::json &j, std::string_view dotted, const nlohmann::json &value);

} // namespace echotrain
