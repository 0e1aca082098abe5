#pragma once

#include "echotrain/pulse.hpp"
#include "echotrain/trajectory.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

namespace echotrain {

struct EchoSettings {
  double tau = 0.0;
  int max_order = 4;
  double window_frac = 0.45;
  /// Ring-down guard after each pulse edge; negative selects 5/κ.
  double guard = -1.0;
  /// Echoes whose peak is below noise_floor × (max |α|² over all echo
  /// windows) end the report.
  double noise_floor = 1e-6;

  void validate() const;
};

nlohmann::json to_json(const EchoSettings &s);
EchoSettings echo_settings_from_json(const nlohmann::json &j);

struct EchoWindow {
  int order = 0; ///< 1 is the echo at 2τ
  double t_lo = 0.0;
  double t_hi = 0.0;
};

struct Echo {
  EchoWindow window;
  double t_peak = 0.0;
  double peak = 0.0;   ///< |α|² at t_peak
  double photons = 0.0; ///< A_echo
};

/// y = a e^{−b x} by least squares on ln y.
struct ExponentialFit {
  double a = 0.0;
  double b = 0.0;
  double residual = 0.0; ///< rms residual of ln y
};

/// y = a x^b by least squares on (ln x, ln y).
struct ScalingFit {
  double a = 0.0;
  double b = 0.0;
  double residual = 0.0;
  std::vector<std::pair<double, double>> points;
};

struct EchoReport {
  EchoSettings settings;
  double t_ref = 0.0;      ///< start of the first pulse
  double guard = 0.0;      ///< guard actually applied
  double noise_floor = 0.0; ///< absolute photon-number floor
  std::vector<Echo> echoes;
  /// Fit of A_echo against echo time (k + 1)τ; b in rad/s.
  std::optional<ExponentialFit> time_fit;
  /// Fit of A_echo against order k; e^{−b} is the per-echo factor.
  std::optional<ExponentialFit> order_fit;
};

/// Echo windows [t_ref + (k+1)τ ∓ window_frac·τ], k = 1..max_order, clipped
/// to the trajectory and to everything outside [pulse start, pulse stop +
/// guard]. Throws std::invalid_argument when a window loses its centre or
/// all of its length to a pulse.
std::vector<EchoWindow> echo_windows(const PulseSequence &seq, const EchoSettings &settings, double kappa,
                                     double t_first, double t_last);

/// Windows, peaks and A_echo = κ ∫|α|² dt per echo, plus decay fits when two
/// or more echoes remain. The list stops at the first window whose maximum is
/// below the noise floor or lies on the window edge (no local maximum inside).
EchoReport detect_echoes(const Trajectory &traj, const PulseSequence &seq, const EchoSettings &settings,
                         double kappa);

/// κ ∫_{t_lo}^{t_hi} |α|² dt by the trapezoidal rule on the samples, with
/// linear interpolation at window edges that fall between samples.
double integrate_echo(const Trajectory &traj, double t_lo, double t_hi, double kappa);

ExponentialFit fit_exponential(const std::vector<std::pair<double, double>> &points);
ScalingFit fit_power_law(const std::vector<std::pair<double, double>> &points);

nlohmann::json to_json(const ExponentialFit &f);
nlohmann::json to_json(const ScalingFit &f);
nlohmann::json to_json(const EchoReport &r);

/// Table `k,t_lo,t_hi,t_peak,peak,a_echo`.
void write_echo_table_csv(const EchoReport &r, const std::filesystem::path &path);

} // namespace echotrain
