#pragma once

#include <numbers>

namespace echotrain {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// All rates are stored as angular frequencies (rad/s). These helpers convert
// the customary "2π × f" notation.
constexpr double from_hz(double f) { return two_pi * f; }
constexpr double to_hz(double omega) { return omega / two_pi; }

constexpr double microseconds(double t) { return t * 1e-6; }

} // namespace echotrain
