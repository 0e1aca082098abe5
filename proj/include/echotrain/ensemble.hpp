#pragma once

#include "echotrain/params.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace echotrain {

enum class Sampling {
  Independent, ///< i.i.d. draws from the detuning distribution
  Stratified,  ///< one seeded draw inside each of N_k equal-probability strata
  Systematic,  ///< equal-probability strata sharing a single seeded offset
};

std::string_view to_string(Sampling s);
Sampling parse_sampling(std::string_view name);

/// Discretized inhomogeneous line: N_k frequency classes, each carrying a
/// detuning Δ_k = δ_a^k − δ_c, a coupling g_k and a weight w_k (spins per
/// class). Stored as parallel arrays; Σ w_k equals params.n_spins.
struct SpinEnsemble {
  std::vector<double> detunings;
  std::vector<double> couplings;
  std::vector<double> weights;
  std::uint64_t seed = 0;
  PhysicalParams params;

  std::size_t size() const { return detunings.size(); }
  double total_weight() const;
  /// sqrt(Σ w g² / Σ w), the per-spin rms coupling.
  double effective_coupling() const;
  /// g_eff sqrt(N), the collective coupling.
  double collective_coupling() const;
  double max_abs_detuning() const;

  void validate() const;
};

/// Random ensemble: detunings drawn from the configured distribution centred
/// at zero, uniform weights N/N_k, homogeneous coupling g_single. The draw
/// uses std::mt19937_64 with hand-written uniform/normal transforms, so the
/// result is a pure function of (params, n_classes, seed, sampling).
SpinEnsemble sample_ensemble(const PhysicalParams &params, std::size_t n_classes, std::uint64_t seed,
                             Sampling sampling = Sampling::Independent);

/// Deterministic ensemble on a uniform grid over [−span, span] with weights
/// proportional to the distribution density.
SpinEnsemble grid_ensemble(const PhysicalParams &params, std::size_t n_classes, double span);

/// Ensemble from explicit arrays (validated).
SpinEnsemble make_ensemble(const PhysicalParams &params, std::vector<double> detunings,
                           std::vector<double> couplings, std::vector<double> weights);

nlohmann::json to_json(const PhysicalParams &p);
PhysicalParams physical_params_from_json(const nlohmann::json &j);

nlohmann::json to_json(const SpinEnsemble &e);
SpinEnsemble ensemble_from_json(const nlohmann::json &j);

} // namespace echotrain
