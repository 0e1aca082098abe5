#include "echotrain/analytic_echo.hpp"

#include "echotrain/detail/field_spin_stepper.hpp"
#include "echotrain/detail/time_grid.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace echotrain {

namespace {

using cplx = std::complex<double>;
constexpr cplx I{0.0, 1.0};

// Oscillator model: no population, damping γ on the amplitude.
struct LinearModel {
  static constexpr bool has_population = false;
  double half_kappa = 0.0;
  double delta_c = 0.0;
  double damping = 0.0;

  void spin(double ar, double ai, double sr, double si, double, double det, double g, double &dsr, double &dsi,
            double &dz) const
  {
    dsr = -damping * sr + det * si + g * ai;
    dsi = -damping * si - det * sr - g * ar;
    dz = 0.0;
  }
};

void require_lorentzian(const AnalyticEchoParams &p, const char *what)
{
  if (p.shape != Distribution::Lorentzian)
    throw std::invalid_argument(std::string(what) + " requires a Lorentzian line");
}

} // namespace

void AnalyticEchoParams::validate() const
{
  auto check = [](double v, const char *name) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(name) + " is not finite");
    if (v < 0.0) throw std::invalid_argument(std::string(name) + " must be non-negative");
  };
  check(beta, "beta");
  check(kappa, "kappa");
  check(gamma_hp, "gamma_hp");
  check(tau, "tau");
  check(width, "width");
  check(g_eff, "g_eff");
  if (!std::isfinite(n_spins) || n_spins < 1.0) throw std::invalid_argument("n_spins must be >= 1");
  if (!std::isfinite(delta_c)) throw std::invalid_argument("delta_c is not finite");
}

double AnalyticEchoParams::fwhm() const
{
  return shape == Distribution::Lorentzian ? width : width * std::sqrt(8.0 * std::numbers::ln2);
}

PhysicalParams AnalyticEchoParams::physical() const
{
  PhysicalParams pp;
  pp.kappa = kappa;
  pp.g_single = g_eff;
  pp.n_spins = n_spins;
  pp.delta_c = delta_c;
  pp.inhomogeneous_fwhm = fwhm();
  pp.distribution = shape;
  return pp;
}

std::string_view to_string(Regime r)
{
  switch (r) {
  case Regime::CavityDominated: return "CavityDominated";
  case Regime::Oscillatory: return "Oscillatory";
  case Regime::SymmetricBadCavity: return "SymmetricBadCavity";
  }
  return "unknown";
}

RegimeReport classify_regime(const AnalyticEchoParams &p)
{
  p.validate();
  require_lorentzian(p, "classify_regime");
  const double gl = p.width;
  RegimeReport r;
  r.zeta_sq = 16.0 * p.g_eff * p.g_eff * p.n_spins - (gl - p.kappa) * (gl - p.kappa);
  r.zeta = r.zeta_sq >= 0.0 ? cplx(std::sqrt(r.zeta_sq), 0.0) : cplx(0.0, std::sqrt(-r.zeta_sq));
  r.sigma_plus = (gl + p.kappa + I * r.zeta) / 4.0;
  r.sigma_minus = (gl + p.kappa - I * r.zeta) / 4.0;
  r.theta_plus = r.zeta * (3.0 * I * gl + I * p.kappa + r.zeta);
  r.theta_minus = r.zeta * (3.0 * I * gl + I * p.kappa - r.zeta);
  if (r.zeta_sq > 0.0)
    r.regime = Regime::Oscillatory;
  else if (gl > p.kappa)
    r.regime = Regime::CavityDominated;
  else
    r.regime = Regime::SymmetricBadCavity;
  return r;
}

nlohmann::json to_json(const RegimeReport &r)
{
  auto c = [](cplx z) { return nlohmann::json{{"re", z.real()}, {"im", z.imag()}}; };
  return {{"regime", std::string(to_string(r.regime))},
          {"zeta_sq", r.zeta_sq},
          {"zeta", c(r.zeta)},
          {"sigma_plus", c(r.sigma_plus)},
          {"sigma_minus", c(r.sigma_minus)},
          {"theta_plus", c(r.theta_plus)},
          {"theta_minus", c(r.theta_minus)}};
}

std::complex<double> eval_echo_closed_form(const AnalyticEchoParams &p, double t, FieldNormalization norm)
{
  require_lorentzian(p, "closed-form echo");
  if (p.gamma_hp != 0.0) throw std::invalid_argument("closed-form echo assumes gamma_hp = 0");
  if (!std::isfinite(t)) throw std::invalid_argument("closed-form echo: t is not finite");
  const auto r = classify_regime(p);
  const double scale = 16.0 * p.g_eff * p.g_eff * p.n_spins + (p.width - p.kappa) * (p.width - p.kappa);
  if (std::abs(r.zeta_sq) <= 1e-12 * scale)
    throw BranchPointError("zeta = 0: the closed form is degenerate at this parameter point; perturb kappa, "
                           "width or the coupling slightly");
  if (p.beta == 0.0 || p.width == 0.0) return {};

  const double gl = p.width;
  const cplx pre = 2.0 * I * p.beta * p.n_spins * gl / std::sqrt(2.0 * std::numbers::pi);
  const double physical = p.g_eff * std::sqrt(2.0 * std::numbers::pi);
  if (t <= p.tau) {
    const cplx a = pre * std::exp(-gl * (p.tau - t) / 2.0) /
                   (-gl * gl - p.kappa * gl - 2.0 * p.g_eff * p.g_eff * p.n_spins);
    return norm == FieldNormalization::Physical ? physical * a : a;
  }
  const double dt = p.tau - t;
  const cplx a = pre * (4.0 * std::exp(r.sigma_minus * dt) / r.theta_plus -
                        4.0 * std::exp(r.sigma_plus * dt) / r.theta_minus);
  return norm == FieldNormalization::Physical ? -physical * a : a;
}

Trajectory closed_form_trajectory(const AnalyticEchoParams &p, double t_end, double stride, FieldNormalization norm)
{
  if (!(stride > 0.0) || !(t_end > 0.0)) throw std::invalid_argument("closed-form trajectory: bad time grid");
  Trajectory traj;
  const auto n = static_cast<std::size_t>(std::floor(t_end / stride * (1.0 + 1e-12)));
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) * stride;
    traj.push_back(t, eval_echo_closed_form(p, t, norm));
  }
  if (traj.times.back() < t_end) traj.push_back(t_end, eval_echo_closed_form(p, t_end, norm));
  traj.meta = {{"model", "closed_form"},
               {"normalization", norm == FieldNormalization::Physical ? "physical" : "unscaled"},
               {"analytic", to_json(p)}};
  return traj;
}

Trajectory simulate_linear_hp(const AnalyticEchoParams &p, const SpinEnsemble &ensemble, double t_end,
                              const IntegratorSettings &integrator, const RecordSettings &record)
{
  p.validate();
  ensemble.validate();
  if (!(t_end > 0.0)) throw std::invalid_argument("simulate_linear_hp: t_end must be positive");
  if (!(record.stride > 0.0)) throw std::invalid_argument("record stride must be positive");
  for (auto k : record.bloch_classes) {
    if (k >= ensemble.size()) throw std::invalid_argument("recorded class index out of range");
  }

  const double other =
      std::max({0.5 * p.kappa, p.gamma_hp, std::abs(p.delta_c), ensemble.collective_coupling()});
  const double dt = resolve_time_step(ensemble.max_abs_detuning(), other, integrator);

  detail::FieldSpinStepper<LinearModel> stepper({0.5 * p.kappa, p.delta_c, p.gamma_hp}, ensemble.detunings,
                                               ensemble.couplings, ensemble.weights,
                                               integrator.scheme == Scheme::SplitStep);
  std::vector<cplx> s0(ensemble.size());
  for (std::size_t k = 0; k < ensemble.size(); ++k) s0[k] = std::polar(p.beta, ensemble.detunings[k] * p.tau);
  stepper.set_state({}, s0, {});

  Trajectory traj;
  nlohmann::json integ = to_json(integrator);
  integ["dt_used"] = dt;
  traj.meta = {{"model", "linear_hp"},
               {"analytic", to_json(p)},
               {"ensemble_seed", ensemble.seed},
               {"n_classes", ensemble.size()},
               {"integrator", integ},
               {"record_stride", record.stride}};
  for (auto k : record.bloch_classes) {
    BlochSeries b;
    b.class_index = k;
    b.detuning = ensemble.detunings[k];
    traj.bloch.push_back(std::move(b));
  }

  std::size_t steps = 0;
  auto step = [&](double, double h, cplx) {
    stepper.step(h, {});
    ++steps;
  };
  auto store = [&](double t) {
    if (!stepper.healthy(0.0)) {
      std::ostringstream msg;
      msg << "numerical instability after step " << steps << " (t = " << t << " s): non-finite value; reduce dt";
      throw NumericalInstability(steps, t, msg.str());
    }
    traj.push_back(t, stepper.alpha());
    // Oscillator amplitudes have no population; sz is left at zero.
    for (auto &b : traj.bloch) {
      b.sx.push_back(2.0 * stepper.sr(b.class_index));
      b.sy.push_back(-2.0 * stepper.si(b.class_index));
      b.sz.push_back(0.0);
    }
  };
  detail::march(PulseSequence({}, t_end), 0.0, t_end, record.stride, dt, step, store);
  traj.meta["steps"] = steps;
  return traj;
}

EchoPeak closed_form_peak(const AnalyticEchoParams &p)
{
  // |α|² rises monotonically up to τ, so the maximum lies in [τ, ∞).
  const auto r = classify_regime(p);
  const double slow = std::min(r.sigma_plus.real(), r.sigma_minus.real());
  if (!(slow > 0.0)) throw std::invalid_argument("closed_form_peak: field does not decay");
  const double t_lo = p.tau;
  const double t_hi = p.tau + 40.0 / slow;
  auto photons = [&](double t) { return std::norm(eval_echo_closed_form(p, t)); };

  constexpr std::size_t samples = 4000;
  const double h = (t_hi - t_lo) / samples;
  std::size_t best = 0;
  double best_val = photons(t_lo);
  for (std::size_t i = 1; i <= samples; ++i) {
    const double v = photons(t_lo + static_cast<double>(i) * h);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  EchoPeak peak{t_lo + static_cast<double>(best) * h, best_val};
  const double a = t_lo + static_cast<double>(best == 0 ? 0 : best - 1) * h;
  const double b = t_lo + static_cast<double>(std::min(best + 1, samples)) * h;
  // Brent's stopping rule has an absolute term of order 2^-bits, so search on [0, 1].
  const auto [u, neg] = boost::math::tools::brent_find_minima(
      [&](double x) { return -photons(a + x * (b - a)); }, 0.0, 1.0, std::numeric_limits<double>::digits / 2);
  if (-neg > peak.photons) peak = {a + u * (b - a), -neg};
  return peak;
}

std::vector<ScalingPoint> superradiant_scaling(const AnalyticEchoParams &p, const std::vector<double> &n_values)
{
  std::vector<ScalingPoint> out;
  out.reserve(n_values.size());
  for (double n : n_values) {
    auto q = p;
    q.n_spins = n;
    out.push_back({n, closed_form_peak(q).photons});
  }
  return out;
}

std::vector<double> log_space(double lo, double hi, std::size_t n)
{
  if (!(lo > 0.0) || !(hi >= lo) || n == 0) throw std::invalid_argument("log_space: need 0 < lo <= hi and n >= 1");
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) v[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  v.front() = lo;
  v.back() = hi;
  return v;
}

nlohmann::json to_json(const AnalyticEchoParams &p)
{
  return {{"beta", p.beta},       {"n_spins", p.n_spins},
          {"g_eff", p.g_eff},     {"kappa", p.kappa},
          {"gamma_hp", p.gamma_hp}, {"tau", p.tau},
          {"shape", std::string(to_string(p.shape))}, {"width", p.width},
          {"delta_c", p.delta_c}};
}

AnalyticEchoParams analytic_params_from_json(const nlohmann::json &j)
{
  AnalyticEchoParams p;
  p.beta = j.at("beta").get<double>();
  p.n_spins = j.at("n_spins").get<double>();
  p.g_eff = j.at("g_eff").get<double>();
  p.kappa = j.at("kappa").get<double>();
  p.gamma_hp = j.at("gamma_hp").get<double>();
  p.tau = j.at("tau").get<double>();
  p.shape = parse_distribution(j.at("shape").get<std::string>());
  p.width = j.at("width").get<double>();
  p.delta_c = j.value("delta_c", 0.0);
  p.validate();
  return p;
}

} // namespace echotrain
