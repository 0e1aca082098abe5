#pragma once

namespace echotrain {

/// Collective cooperativity C = 4 g_eff² / (κ Γ).
double cooperativity(double g_eff, double kappa, double width);

/// Homogeneous linewidth 1/T2. The result is in rad/s, i.e. dividing by 2π
/// gives the linewidth in Hz.
double linewidth_from_t2(double t2);

} // namespace echotrain
