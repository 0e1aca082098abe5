#include "echotrain/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace echotrain {

namespace {

// Uniform in the open interval (0, 1) from the top 53 bits of the engine.
double open_uniform(std::mt19937_64 &engine)
{
  return (static_cast<double>(engine() >> 11) + 0.5) * 0x1.0p-53;
}

std::vector<double> iid_detunings(const PhysicalParams &p, std::size_t n, std::mt19937_64 &engine)
{
  std::vector<double> out(n);
  if (p.distribution == Distribution::Lorentzian) {
    const double half = 0.5 * p.inhomogeneous_fwhm;
    for (auto &d : out) d = half * std::tan(std::numbers::pi * (open_uniform(engine) - 0.5));
    return out;
  }
  // Box-Muller, both outputs used.
  const double sigma = gaussian_sigma(p.inhomogeneous_fwhm);
  for (std::size_t i = 0; i < n; i += 2) {
    const double r = std::sqrt(-2.0 * std::log(open_uniform(engine)));
    const double phi = 2.0 * std::numbers::pi * open_uniform(engine);
    out[i] = sigma * r * std::cos(phi);
    if (i + 1 < n) out[i + 1] = sigma * r * std::sin(phi);
  }
  return out;
}

} // namespace

std::string_view to_string(Sampling s)
{
  switch (s) {
  case Sampling::Independent: return "iid";
  case Sampling::Stratified: return "stratified";
  case Sampling::Systematic: return "systematic";
  }
  return "iid";
}

Sampling parse_sampling(std::string_view name)
{
  if (name == "iid") return Sampling::Independent;
  if (name == "stratified") return Sampling::Stratified;
  if (name == "systematic") return Sampling::Systematic;
  throw std::invalid_argument("unknown sampling scheme '" + std::string(name) + "'");
}

double SpinEnsemble::total_weight() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

double SpinEnsemble::effective_coupling() const
{
  double num = 0.0;
  for (std::size_t k = 0; k < size(); ++k) num += weights[k] * couplings[k] * couplings[k];
  const double total = total_weight();
  return total > 0.0 ? std::sqrt(num / total) : 0.0;
}

double SpinEnsemble::collective_coupling() const { return effective_coupling() * std::sqrt(total_weight()); }

double SpinEnsemble::max_abs_detuning() const
{
  double m = 0.0;
  for (double d : detunings) m = std::max(m, std::abs(d));
  return m;
}

void SpinEnsemble::validate() const
{
  if (detunings.empty()) throw std::invalid_argument("ensemble has no frequency classes");
  if (couplings.size() != size() || weights.size() != size())
    throw std::invalid_argument("ensemble arrays differ in length");
  for (std::size_t k = 0; k < size(); ++k) {
    if (!std::isfinite(detunings[k]) || !std::isfinite(couplings[k]) || !std::isfinite(weights[k]))
      throw std::invalid_argument("ensemble contains non-finite values");
    if (weights[k] < 0.0) throw std::invalid_argument("ensemble weight is negative");
  }
  const double total = total_weight();
  if (std::abs(total - params.n_spins) > 1e-9 * params.n_spins)
    throw std::invalid_argument("ensemble weights do not sum to n_spins");
}

SpinEnsemble sample_ensemble(const PhysicalParams &params, std::size_t n_classes, std::uint64_t seed,
                             Sampling sampling)
{
  params.validate();
  if (n_classes == 0) throw std::invalid_argument("sample_ensemble: n_classes must be positive");

  SpinEnsemble e;
  e.params = params;
  e.seed = seed;
  if (params.inhomogeneous_fwhm == 0.0) {
    e.detunings.assign(n_classes, 0.0);
  } else if (sampling == Sampling::Independent) {
    std::mt19937_64 engine(seed);
    e.detunings = iid_detunings(params, n_classes, engine);
  } else {
    std::mt19937_64 engine(seed);
    e.detunings.resize(n_classes);
    const double n = static_cast<double>(n_classes);
    const double shared = sampling == Sampling::Systematic ? open_uniform(engine) : 0.0;
    for (std::size_t k = 0; k < n_classes; ++k) {
      const double offset = sampling == Sampling::Systematic ? shared : open_uniform(engine);
      const double u = (static_cast<double>(k) + offset) / n;
      e.detunings[k] = detuning_quantile(params.distribution, params.inhomogeneous_fwhm, u);
    }
  }
  e.couplings.assign(n_classes, params.g_single);
  e.weights.assign(n_classes, params.n_spins / static_cast<double>(n_classes));
  return e;
}

SpinEnsemble grid_ensemble(const PhysicalParams &params, std::size_t n_classes, double span)
{
  params.validate();
  if (n_classes == 0) throw std::invalid_argument("grid_ensemble: n_classes must be positive");
  if (!(span > 0.0) || !std::isfinite(span)) throw std::invalid_argument("grid_ensemble: span must be positive");

  SpinEnsemble e;
  e.params = params;
  e.couplings.assign(n_classes, params.g_single);
  if (n_classes == 1) {
    e.detunings = {0.0};
    e.weights = {params.n_spins};
    return e;
  }
  if (params.inhomogeneous_fwhm == 0.0)
    throw std::invalid_argument("grid_ensemble: a zero-width distribution needs n_classes = 1");

  e.detunings.resize(n_classes);
  e.weights.resize(n_classes);
  const double step = 2.0 * span / static_cast<double>(n_classes - 1);
  for (std::size_t k = 0; k < n_classes; ++k) {
    e.detunings[k] = -span + step * static_cast<double>(k);
    e.weights[k] = detuning_density(params.distribution, params.inhomogeneous_fwhm, e.detunings[k]);
  }
  const double norm = std::accumulate(e.weights.begin(), e.weights.end(), 0.0);
  for (auto &w : e.weights) w *= params.n_spins / norm;
  return e;
}

SpinEnsemble make_ensemble(const PhysicalParams &params, std::vector<double> detunings,
                           std::vector<double> couplings, std::vector<double> weights)
{
  SpinEnsemble e;
  e.params = params;
  e.detunings = std::move(detunings);
  e.couplings = std::move(couplings);
  e.weights = std::move(weights);
  e.validate();
  return e;
}

nlohmann::json to_json(const PhysicalParams &p)
{
  return {{"kappa", p.kappa},
          {"gamma", p.gamma},
          {"dephasing", p.dephasing},
          {"g_single", p.g_single},
          {"n_spins", p.n_spins},
          {"delta_c", p.delta_c},
          {"inhomogeneous_fwhm", p.inhomogeneous_fwhm},
          {"distribution", std::string(to_string(p.distribution))}};
}

PhysicalParams physical_params_from_json(const nlohmann::json &j)
{
  PhysicalParams p;
  p.kappa = j.at("kappa").get<double>();
  p.gamma = j.at("gamma").get<double>();
  p.dephasing = j.at("dephasing").get<double>();
  p.g_single = j.at("g_single").get<double>();
  p.n_spins = j.at("n_spins").get<double>();
  p.delta_c = j.at("delta_c").get<double>();
  p.inhomogeneous_fwhm = j.at("inhomogeneous_fwhm").get<double>();
  p.distribution = parse_distribution(j.at("distribution").get<std::string>());
  p.validate();
  return p;
}

nlohmann::json to_json(const SpinEnsemble &e)
{
  return {{"detunings", e.detunings},
          {"weights", e.weights},
          {"couplings", e.couplings},
          {"seed", e.seed},
          {"params", to_json(e.params)}};
}

SpinEnsemble ensemble_from_json(const nlohmann::json &j)
{
  SpinEnsemble e = make_ensemble(physical_params_from_json(j.at("params")),
                                 j.at("detunings").get<std::vector<double>>(),
                                 j.at("couplings").get<std::vector<double>>(),
                                 j.at("weights").get<std::vector<double>>());
  e.seed = j.at("seed").get<std::uint64_t>();
  return e;
}

} // namespace echotrain
