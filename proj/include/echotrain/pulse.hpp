#pragma once

#include "json.hpp"

#include <complex>
#include <vector>

namespace echotrain {

/// Square drive pulse. Inside [t_start, t_start + duration) the cavity is
/// driven with amplitude·e^{iφ}.
struct Pulse {
  double t_start = 0.0;
  double duration = 0.0;
  double amplitude = 0.0; ///< F, rad/s
  double phase = 0.0;     ///< φ, rad

  double t_stop() const { return t_start + duration; }
  std::complex<double> drive() const { return std::polar(amplitude, phase); }
};

/// Time-ordered, non-overlapping square pulses plus the simulated duration.
class PulseSequence {
public:
  PulseSequence() = default;
  PulseSequence(std::vector<Pulse> pulses, double t_end);

  const std::vector<Pulse> &pulses() const { return pulses_; }
  double t_end() const { return t_end_; }
  bool empty() const { return pulses_.empty(); }

  /// Drive F·e^{iφ} at time t (zero between pulses).
  std::complex<double> drive_at(double t) const;

  /// Pulse start and stop times, sorted.
  std::vector<double> edges() const;

  PulseSequence shifted(double offset) const;
  PulseSequence with_phase_offset(double theta) const;

private:
  std::vector<Pulse> pulses_;
  double t_end_ = 0.0;
};

/// Two-pulse Hahn sequence. The delay τ runs from the end of pulse 1 to the
/// start of pulse 2.
struct HahnTiming {
  double tau = 0.0;
  double t1 = 0.20e-6;
  double d1 = 0.22e-6;
  double d2 = 0.43e-6;
  double amplitude = 5e10;
  double phase1 = 0.0;
  double phase2 = 0.0;
  double t_end = 0.0;
};

PulseSequence hahn_sequence(const HahnTiming &timing);

nlohmann::json to_json(const PulseSequence &seq);
PulseSequence pulse_sequence_from_json(const nlohmann::json &j);

} // namespace echotrain
