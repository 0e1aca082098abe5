#pragma once

#include "echotrain/analytic_echo.hpp"
#include "echotrain/ensemble.hpp"
#include "echotrain/trajectory.hpp"

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace echotrain {

/// Frequency-domain solution of the linear model,
///
///   ã(ω) = (−i/√(2π)) N β g I₁(ω) / (κ/2 + iδ_c − iω + N g² I₀(ω)),
///   I₀(ω) = ∫ f(Δ) / (γ + iΔ − iω) dΔ,   I₁(ω) = ∫ f(Δ) e^{iΔτ} / (γ + iΔ − iω) dΔ,
///
/// with the convention ã(ω) = (2π)^{-1/2} ∫ a(t) e^{iωt} dt. ω may be complex;
/// with γ = 0 the line integrals are regular only for Im ω > 0.

struct QuadratureSettings {
  double rel_tol = 1e-8;
  unsigned max_depth = 15; ///< bisection depth per interval; bounds the worst-case cost
  double gaussian_window = 40.0; ///< half-width of the Gaussian integration range in units of Γ_G
};

/// Raised when adaptive quadrature misses its tolerance.
class QuadratureError : public std::runtime_error {
public:
  QuadratureError(const std::string &what, double estimate)
    : std::runtime_error(what)
    , estimate_(estimate)
  {
  }
  double estimate() const { return estimate_; }

private:
  double estimate_;
};

/// Continuum line (shape and width from p) integrated numerically.
std::complex<double> eval_spectrum(const AnalyticEchoParams &p, std::complex<double> omega,
                                   const QuadratureSettings &quad = {});
std::vector<std::complex<double>> eval_spectrum(const AnalyticEchoParams &p,
                                                const std::vector<std::complex<double>> &omegas,
                                                const QuadratureSettings &quad = {});

/// Discrete ensemble: the line integrals become Σ_k w_k g_k(...) sums.
std::complex<double> eval_spectrum(const AnalyticEchoParams &p, const SpinEnsemble &ensemble,
                                   std::complex<double> omega);

/// Cavity susceptibility 1 / (κ/2 + iδ_c − iω + N g² I₀(ω)).
std::complex<double> cavity_response(const AnalyticEchoParams &p, std::complex<double> omega,
                                     const QuadratureSettings &quad = {});

struct InversionSettings {
  double period = 0.0;                   ///< 0: 2τ plus 40 slowest decay times, at least 3τ
  std::size_t points = std::size_t{1} << 16;
  double eta = 0.0;                      ///< contour offset Im ω; 0 selects 1/period
  QuadratureSettings quad;
};

/// a(t) on [0, t_end] by inverse DFT of ã along ω + iη (FFTW), followed by
/// the e^{ηt} correction. Samples lie on the DFT grid period/points.
Trajectory invert_spectrum(const AnalyticEchoParams &p, double t_end, const InversionSettings &settings = {});

} // namespace echotrain
