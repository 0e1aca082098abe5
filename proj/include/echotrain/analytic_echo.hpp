#pragma once

#include "echotrain/ensemble.hpp"
#include "echotrain/meanfield.hpp"
#include "echotrain/params.hpp"
#include "echotrain/trajectory.hpp"

#include "json.hpp"

#include <complex>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace echotrain {

/// Inputs of the linearized (Holstein-Primakoff) first-echo model. The spins
/// start as oscillators with amplitude β e^{iΔτ} and rephase at t = τ.
struct AnalyticEchoParams {
  double beta = 1.0;
  double n_spins = 1.0;
  double g_eff = 0.0;    ///< rms single-spin coupling
  double kappa = 0.0;
  double gamma_hp = 0.0; ///< oscillator damping rate
  double tau = 0.0;
  Distribution shape = Distribution::Lorentzian;
  /// Lorentzian: FWHM Γ_L. Gaussian: Γ_G, the standard deviation
  /// (FWHM = Γ_G sqrt(8 ln 2)).
  double width = 0.0;
  double delta_c = 0.0;

  void validate() const;
  /// FWHM of the line regardless of shape.
  double fwhm() const;
  /// Physical parameters of a matching ensemble (γ = Γ = 0).
  PhysicalParams physical() const;
};

enum class Regime { CavityDominated, Oscillatory, SymmetricBadCavity };

std::string_view to_string(Regime r);

struct RegimeReport {
  double zeta_sq = 0.0;
  std::complex<double> zeta;
  std::complex<double> sigma_plus, sigma_minus;
  std::complex<double> theta_plus, theta_minus;
  Regime regime = Regime::Oscillatory;
};

/// ζ² = 16 g² N − (Γ_L − κ)², ζ = sqrt(ζ²) for ζ² > 0 and i sqrt(−ζ²) otherwise,
/// Σ± = (Γ_L + κ ± iζ)/4, Θ± = ζ(3iΓ_L + iκ ± ζ). Lorentzian only.
RegimeReport classify_regime(const AnalyticEchoParams &p);

nlohmann::json to_json(const RegimeReport &r);

/// Raised at ζ = 0, where the two-exponential form degenerates.
class BranchPointError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Overall scale of the closed-form field.
///
/// Unscaled is the bare two-branch expression without the coupling factor. Physical
/// multiplies the t ≤ τ branch by g√(2π) and the t > τ branch by −g√(2π);
/// this is the field of the linear oscillator model itself, continuous at
/// t = τ, and the normalization used whenever the closed form is compared
/// with the spectrum inversion or a time-domain simulation.
enum class FieldNormalization { Unscaled, Physical };

/// Closed-form first-echo field for a Lorentzian line with γ = 0.
/// Throws BranchPointError when ζ = 0.
std::complex<double> eval_echo_closed_form(const AnalyticEchoParams &p, double t,
                                           FieldNormalization norm = FieldNormalization::Physical);

/// Closed-form field sampled on [0, t_end] with the given stride.
Trajectory closed_form_trajectory(const AnalyticEchoParams &p, double t_end, double stride,
                                  FieldNormalization norm = FieldNormalization::Physical);

/// Linear oscillator model integrated in the time domain,
///
///   dα/dt  = −(κ/2 + iδ_c) α − i Σ_k w_k g_k s_k
///   ds_k/dt = −(γ + iΔ_k) s_k − i g_k α,   s_k(0) = β e^{iΔ_k τ}, α(0) = 0,
///
/// with couplings and weights from the ensemble. The default scheme is
/// split-step, which handles the wide Lorentzian tails without a tiny dt.
Trajectory simulate_linear_hp(const AnalyticEchoParams &p, const SpinEnsemble &ensemble, double t_end,
                              const IntegratorSettings &integrator = {0.0, Scheme::SplitStep},
                              const RecordSettings &record = {});

struct EchoPeak {
  double t = 0.0;
  double photons = 0.0;
};

/// Maximum of |α|² of the closed form (Physical normalization) located by a
/// dense scan followed by Brent refinement.
EchoPeak closed_form_peak(const AnalyticEchoParams &p);

struct ScalingPoint {
  double n_spins = 0.0;
  double peak = 0.0;
};

/// Peak photon number of the closed form for each N, all else fixed.
std::vector<ScalingPoint> superradiant_scaling(const AnalyticEchoParams &p, const std::vector<double> &n_values);

/// n points spaced logarithmically from lo to hi inclusive.
std::vector<double> log_space(double lo, double hi, std::size_t n);

nlohmann::json to_json(const AnalyticEchoParams &p);
AnalyticEchoParams analytic_params_from_json(const nlohmann::json &j);

} // namespace echotrain
