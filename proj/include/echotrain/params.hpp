#pragma once

#include <string>
#include <string_view>

namespace echotrain {

enum class Distribution { Gaussian, Lorentzian };

std::string_view to_string(Distribution d);
Distribution parse_distribution(std::string_view name);

/// Rates and couplings of the driven Tavis-Cummings model with cavity decay,
/// spin relaxation and pure dephasing. Every rate is an angular frequency.
struct PhysicalParams {
  double kappa = 0.0;              ///< cavity energy decay rate (FWHM linewidth)
  double gamma = 0.0;              ///< spin energy relaxation rate
  double dephasing = 0.0;          ///< pure dephasing rate Γ (rate of the D[σz] term)
  double g_single = 0.0;           ///< single-spin coupling
  double n_spins = 1.0;            ///< physical spin count N
  double delta_c = 0.0;            ///< cavity-drive detuning ω_c − ω_p
  double inhomogeneous_fwhm = 0.0; ///< FWHM of the detuning distribution
  Distribution distribution = Distribution::Gaussian;

  /// Throws std::invalid_argument on negative rates, non-finite values or N < 1.
  void validate() const;
};

/// Standard deviation of a Gaussian with the given FWHM (FWHM / sqrt(8 ln 2)).
double gaussian_sigma(double fwhm);

/// Normalized probability density of the detuning distribution at `delta`.
double detuning_density(Distribution d, double fwhm, double delta);

/// Inverse cumulative distribution, u in (0, 1).
double detuning_quantile(Distribution d, double fwhm, double u);

} // namespace echotrain
