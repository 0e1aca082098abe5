#include "echotrain/pulse.hpp"

#include <cmath>
#include <stdexcept>

namespace echotrain {

PulseSequence::PulseSequence(std::vector<Pulse> pulses, double t_end)
  : pulses_(std::move(pulses))
  , t_end_(t_end)
{
  if (!std::isfinite(t_end) || t_end <= 0.0) throw std::invalid_argument("pulse sequence: t_end must be positive");
  double previous_stop = 0.0;
  for (const auto &p : pulses_) {
    if (!std::isfinite(p.t_start) || !std::isfinite(p.duration) || !std::isfinite(p.amplitude) ||
        !std::isfinite(p.phase))
      throw std::invalid_argument("pulse sequence: non-finite pulse parameter");
    if (p.duration <= 0.0) throw std::invalid_argument("pulse sequence: pulse duration must be positive");
    if (p.t_start < previous_stop) throw std::invalid_argument("pulse sequence: pulses overlap or are out of order");
    previous_stop = p.t_stop();
  }
  if (!pulses_.empty() && !(t_end_ > previous_stop))
    throw std::invalid_argument("pulse sequence: t_end must lie after the last pulse");
}

std::complex<double> PulseSequence::drive_at(double t) const
{
  for (const auto &p : pulses_) {
    if (t >= p.t_start && t < p.t_stop()) return p.drive();
  }
  return {};
}

std::vector<double> PulseSequence::edges() const
{
  std::vector<double> out;
  out.reserve(2 * pulses_.size());
  for (const auto &p : pulses_) {
    out.push_back(p.t_start);
    out.push_back(p.t_stop());
  }
  return out;
}

PulseSequence PulseSequence::shifted(double offset) const
{
  auto moved = pulses_;
  for (auto &p : moved) p.t_start += offset;
  return PulseSequence(std::move(moved), t_end_ + offset);
}

PulseSequence PulseSequence::with_phase_offset(double theta) const
{
  auto rotated = pulses_;
  for (auto &p : rotated) p.phase += theta;
  return PulseSequence(std::move(rotated), t_end_);
}

PulseSequence hahn_sequence(const HahnTiming &h)
{
  if (!(h.d1 > 0.0) || !(h.d2 > 0.0)) throw std::invalid_argument("hahn_sequence: pulse durations must be positive");
  if (h.t1 < 0.0) throw std::invalid_argument("hahn_sequence: t1 must be non-negative");
  if (h.tau < 0.0) throw std::invalid_argument("hahn_sequence: negative delay makes the pulses overlap");
  const double second = h.t1 + h.d1 + h.tau;
  if (!(h.t_end > second + h.d2)) throw std::invalid_argument("hahn_sequence: t_end must lie after the second pulse");
  return PulseSequence({Pulse{h.t1, h.d1, h.amplitude, h.phase1}, Pulse{second, h.d2, h.amplitude, h.phase2}}, h.t_end);
}

nlohmann::json to_json(const PulseSequence &seq)
{
  nlohmann::json pulses = nlohmann::json::array();
  for (const auto &p : seq.pulses()) {
    pulses.push_back({{"t_start", p.t_start}, {"duration", p.duration}, {"amplitude", p.amplitude}, {"phase", p.phase}});
  }
  return {{"pulses", pulses}, {"t_end", seq.t_end()}};
}

PulseSequence pulse_sequence_from_json(const nlohmann::json &j)
{
  std::vector<Pulse> pulses;
  for (const auto &p : j.at("pulses")) {
    pulses.push_back(Pulse{p.at("t_start").get<double>(), p.at("duration").get<double>(),
                           p.at("amplitude").get<double>(), p.at("phase").get<double>()});
  }
  return PulseSequence(std::move(pulses), j.at("t_end").get<double>());
}

} // namespace echotrain
