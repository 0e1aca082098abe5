#pragma once

#include "echotrain/ensemble.hpp"
#include "echotrain/params.hpp"
#include "echotrain/pulse.hpp"
#include "echotrain/trajectory.hpp"

#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace echotrain {

/// Mean-field state: cavity amplitude ⟨a⟩ and per-class ⟨σ−⟩, ⟨σz⟩.
struct SystemState {
  double t = 0.0;
  std::complex<double> alpha{};
  std::vector<std::complex<double>> s_minus;
  std::vector<double> s_z;

  /// All spins in the ground state, empty cavity.
  static SystemState ground(std::size_t n_classes);

  std::size_t size() const { return s_minus.size(); }
};

struct StateDerivative {
  std::complex<double> alpha{};
  std::vector<std::complex<double>> s_minus;
  std::vector<double> s_z;
};

/// Right-hand side of the factorized Heisenberg-Langevin equations
///
///   dα/dt    = −(iδ_c + κ/2) α − i Σ_k w_k g_k s_k − i F e^{iφ}
///   ds_k/dt  = −(iΔ_k + γ/2 + 2Γ) s_k + i g_k α z_k
///   dz_k/dt  = −γ (1 + z_k) + 2i g_k (α* s_k − α s_k*)
///
/// `drive` is F e^{iφ}. Throws std::invalid_argument on non-finite input.
StateDerivative derivative(const SystemState &state, const SpinEnsemble &ensemble, const PhysicalParams &params,
                           std::complex<double> drive);

enum class Scheme {
  Rk4,       ///< classical RK4 on the full rotating-frame equations
  SplitStep, ///< exact e^{−iΔ_k h/2} rotations around an RK4 step of the remainder (Strang)
};

std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view name);

struct IntegratorSettings {
  double dt = 0.0;        ///< step size; 0 selects c_stab / (fastest rate)
  Scheme scheme = Scheme::Rk4;
  double c_stab = 0.3;    ///< dt · max|Δ_k| bound for the RK4 scheme
  double tolerance = 1e-6; ///< ε_int used by the instability guard
};

struct RecordSettings {
  double stride = 10e-9;
  std::vector<std::size_t> bloch_classes; ///< at most max_bloch_classes entries
};

inline constexpr std::size_t max_bloch_classes = 64;

/// Thrown when the state leaves the Bloch ball or stops being finite.
class NumericalInstability : public std::runtime_error {
public:
  NumericalInstability(std::size_t step, double t, const std::string &what);
  std::size_t step() const { return step_; }
  double time() const { return time_; }

private:
  std::size_t step_;
  double time_;
};

/// Step size actually used for the given settings. For RK4 an explicit dt
/// larger than c_stab / max|Δ_k| is rejected.
double resolve_time_step(const SpinEnsemble &ensemble, const PhysicalParams &params,
                         const IntegratorSettings &integrator);

/// Same rule from the two rate scales directly: the largest |Δ_k| and the
/// fastest of the remaining rates (κ/2, coherence decay, |δ_c|, g_eff sqrt(N)).
double resolve_time_step(double max_detuning, double other_rate, const IntegratorSettings &integrator);

/// Integrates from the all-ground state (or `initial`, if given) to seq.t_end().
Trajectory simulate(const SpinEnsemble &ensemble, const PhysicalParams &params, const PulseSequence &seq,
                    const IntegratorSettings &integrator, const RecordSettings &record,
                    const std::optional<SystemState> &initial = std::nullopt);

/// Same, additionally returning the final state.
Trajectory simulate(const SpinEnsemble &ensemble, const PhysicalParams &params, const PulseSequence &seq,
                    const IntegratorSettings &integrator, const RecordSettings &record, SystemState &state);

/// Ideal π/2–τ–π initialization: s_k = (β/2) e^{iΔ_k τ}, z_k = −sqrt(1 − β²),
/// α = 0, no drive; all classes rephase at t = τ.
struct IdealInit {
  double tau = 0.0;
  double beta = 1.0;
  double t_end = 0.0; ///< must be ≥ 2τ
};

SystemState ideal_initial_state(const SpinEnsemble &ensemble, double tau, double beta);

Trajectory simulate_ideal_init(const SpinEnsemble &ensemble, const PhysicalParams &params, const IdealInit &init,
                               const IntegratorSettings &integrator, const RecordSettings &record);

struct ConvergenceReport {
  double dt = 0.0;
  /// max_t | n_dt(t) − n_{dt/2}(t) | / max_t n_{dt/2}(t), with n = |α|².
  double max_deviation = 0.0;
};

ConvergenceReport convergence_check(const SpinEnsemble &ensemble, const PhysicalParams &params,
                                    const PulseSequence &seq, const IntegratorSettings &integrator,
                                    const RecordSettings &record);

/// Peak-normalized max deviation between two photon-number series sampled at
/// the same instants.
double max_relative_deviation(const Trajectory &a, const Trajectory &reference);

nlohmann::json to_json(const IntegratorSettings &s);

} // namespace echotrain
