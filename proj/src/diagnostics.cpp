#include "echotrain/diagnostics.hpp"

#include <cmath>
#include <stdexcept>

namespace echotrain {

double cooperativity(double g_eff, double kappa, double width)
{
  if (!(kappa > 0.0) || !(width > 0.0)) throw std::invalid_argument("cooperativity: kappa and width must be positive");
  return 4.0 * g_eff * g_eff / (kappa * width);
}

double linewidth_from_t2(double t2)
{
  if (!(t2 > 0.0) || !std::isfinite(t2)) throw std::invalid_argument("linewidth_from_t2: T2 must be positive");
  return 1.0 / t2;
}

} // namespace echotrain
