#pragma once

#include "echotrain/analytic_echo.hpp"
#include "echotrain/config.hpp"
#include "echotrain/echo_analysis.hpp"
#include "echotrain/trajectory.hpp"

#include "json.hpp"

#include <cstdint>
#include <exception>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace echotrain {

/// Failure of one realization; names the ensemble seed that failed.
class RealizationError : public std::runtime_error {
public:
  RealizationError(std::uint64_t seed, const std::string &what)
    : std::runtime_error(what)
    , seed_(seed)
  {
  }
  std::uint64_t seed() const { return seed_; }

private:
  std::uint64_t seed_;
};

/// Process exit code for a failure: 2 invalid configuration or input,
/// 3 numerical instability, 4 closed-form branch point, 1 anything else.
int exit_code_for(const std::exception_ptr &e);

struct AveragedRun {
  /// photon_number is the pointwise mean of |α|² over realizations;
  /// alpha_re/alpha_im hold the mean complex field.
  Trajectory mean;
  std::vector<std::uint64_t> seeds;
  std::vector<Trajectory> realizations; ///< filled only when requested
};

/// One mean-field realization with the given ensemble seed.
Trajectory run_realization(const RunConfig &config, std::uint64_t seed);

/// R realizations with seeds base_seed + i, run concurrently and averaged in
/// seed order. A NumericalInstability is rethrown with the failing seed in
/// its message, rejected inputs (std::invalid_argument) become ConfigError and
/// any other failure becomes a RealizationError.
AveragedRun run_averaged(const RunConfig &config, std::size_t realizations, std::uint64_t base_seed,
                         bool keep_realizations = false);
AveragedRun run_averaged(const RunConfig &config);

/// The settings with max_order reduced to the orders whose window centre
/// t_ref + (k+1)τ lies inside a run ending at t_last. Throws ConfigError when
/// not even the first echo fits.
EchoSettings settings_within_run(const PulseSequence &pulses, EchoSettings settings, double t_last);

/// Output of one configured run in any mode.
struct RunResult {
  Trajectory trajectory;
  std::vector<Trajectory> realizations;
  std::optional<EchoReport> echoes;
  std::optional<RegimeReport> regime;
  std::optional<ScalingFit> scaling;
  std::optional<Trajectory> inversion;
};

/// Meanfield: run_averaged plus echo analysis. Linear: simulate_linear_hp on
/// the configured ensemble. Analytic: closed form, regime (Lorentzian) and
/// the optional scaling fit and spectrum inversion.
RunResult execute(const RunConfig &config);

struct SweepSpec {
  std::string name;
  nlohmann::json base; ///< canonical configuration the axes are applied to
  std::vector<SweepAxis> axes;
  std::size_t realizations = 1;
  std::uint64_t base_seed = 0;
  std::size_t max_cells = 256;
};

SweepSpec sweep_spec_from_config(const RunConfig &config);

struct SweepCell {
  std::size_t index = 0;
  std::string key; ///< directory-safe, e.g. "pulses.hahn.tau=3e-05"
  nlohmann::json coordinates = nlohmann::json::object();
  nlohmann::json config;
  std::optional<RunResult> result;
  std::string error;
  int error_code = 0; ///< CLI-style code of the failure (2 config, 3 instability, 4 branch point, 1 other)
};

/// Cartesian product of the axes (first axis slowest). Throws ConfigError
/// when the product exceeds max_cells.
std::vector<SweepCell> expand_sweep(const SweepSpec &spec);

/// Runs every cell concurrently; failures are recorded per cell and the
/// other cells continue. Cells share the base seed, so each cell is the
/// same random ensemble under different parameters.
std::vector<SweepCell> run_sweep(const SweepSpec &spec);

/// Flat results table: cell key, axis values, echo count, per-echo peak
/// times and A_echo, fitted decay rate, error. In the CSV, frequency-valued
/// axes are written in rad/s.
nlohmann::json sweep_table_json(const SweepSpec &spec, const std::vector<SweepCell> &cells);
std::string sweep_table_csv(const SweepSpec &spec, const std::vector<SweepCell> &cells);

} // namespace echotrain
