#pragma once

#include "echotrain/pulse.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace echotrain::detail {

// Fixed-step marching over [t_start, t_end]. Record instants sit on the grid
// t_start + j·stride (plus t_end); every record interval is further cut at
// pulse edges, and each piece is covered by equal steps no longer than dt.
// The drive is therefore constant within a step, which keeps RK4 at full
// order across the discontinuities of square pulses.
//
// step(t, h, drive) advances the state by h; record(t) stores a sample. The
// initial sample at t_start is recorded before the first step.
template <class Step, class Record>
void march(const PulseSequence &seq, double t_start, double t_end, double stride, double dt, Step &&step,
           Record &&record)
{
  if (!(stride > 0.0) || !(dt > 0.0)) throw std::invalid_argument("march: stride and dt must be positive");
  if (!(t_end > t_start)) throw std::invalid_argument("march: empty time span");

  const auto edges = seq.edges();
  record(t_start);

  double a = t_start;
  for (std::size_t j = 1;; ++j) {
    double b = t_start + static_cast<double>(j) * stride;
    const bool last = b >= t_end - 1e-9 * stride;
    if (last) b = t_end;

    std::vector<double> cuts{a};
    for (double e : edges) {
      if (e > a && e < b) cuts.push_back(e);
    }
    cuts.push_back(b);

    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double u = cuts[c];
      const double v = cuts[c + 1];
      const double len = v - u;
      const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / dt * (1.0 - 1e-12))));
      const double h = len / static_cast<double>(n);
      const std::complex<double> drive = seq.drive_at(0.5 * (u + v));
      for (std::size_t i = 0; i < n; ++i) step(u + static_cast<double>(i) * h, h, drive);
    }
    record(b);
    if (last) break;
    a = b;
  }
}

} // namespace echotrain::detail
