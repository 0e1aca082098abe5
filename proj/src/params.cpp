#include "echotrain/params.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace echotrain {

std::string_view to_string(Distribution d)
{
  switch (d) {
  case Distribution::Gaussian: return "gaussian";
  case Distribution::Lorentzian: return "lorentzian";
  }
  return "unknown";
}

Distribution parse_distribution(std::string_view name)
{
  if (name == "gaussian") return Distribution::Gaussian;
  if (name == "lorentzian") return Distribution::Lorentzian;
  throw std::invalid_argument("unknown distribution '" + std::string(name) + "'");
}

void PhysicalParams::validate() const
{
  auto check = [](double v, const char *name) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(name) + " is not finite");
    if (v < 0.0) throw std::invalid_argument(std::string(name) + " must be non-negative");
  };
  check(kappa, "kappa");
  check(gamma, "gamma");
  check(dephasing, "dephasing");
  check(inhomogeneous_fwhm, "inhomogeneous_fwhm");
  if (!std::isfinite(g_single)) throw std::invalid_argument("g_single is not finite");
  if (!std::isfinite(delta_c)) throw std::invalid_argument("delta_c is not finite");
  if (!std::isfinite(n_spins) || n_spins < 1.0) throw std::invalid_argument("n_spins must be >= 1");
}

double gaussian_sigma(double fwhm) { return fwhm / std::sqrt(8.0 * std::numbers::ln2); }

double detuning_density(Distribution d, double fwhm, double delta)
{
  if (fwhm <= 0.0) throw std::invalid_argument("density of a degenerate distribution");
  if (d == Distribution::Gaussian) {
    const double sigma = gaussian_sigma(fwhm);
    const double x = delta / sigma;
    return std::exp(-0.5 * x * x) / (std::sqrt(2.0 * std::numbers::pi) * sigma);
  }
  const double half = 0.5 * fwhm;
  return (half / std::numbers::pi) / (delta * delta + half * half);
}

double detuning_quantile(Distribution d, double fwhm, double u)
{
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("quantile argument outside (0, 1)");
  if (fwhm == 0.0) return 0.0;
  if (d == Distribution::Gaussian)
    return gaussian_sigma(fwhm) * std::numbers::sqrt2 * boost::math::erf_inv(2.0 * u - 1.0);
  return 0.5 * fwhm * std::tan(std::numbers::pi * (u - 0.5));
}

} // namespace echotrain
