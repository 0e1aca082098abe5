#include "echotrain/analytic_echo.hpp"
#include "echotrain/units.hpp"

#include "doctest.h"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

using namespace echotrain;
using cplx = std::complex<double>;

namespace {

AnalyticEchoParams oscillatory()
{
  AnalyticEchoParams p;
  p.beta = 1.0;
  p.n_spins = 1e10;
  p.g_eff = from_hz(8.0);
  p.kappa = from_hz(150e3);
  p.tau = 45e-6;
  p.width = from_hz(0.5e6);
  return p;
}

AnalyticEchoParams cavity_dominated()
{
  auto p = oscillatory();
  p.n_spins = 1e9;
  p.width = from_hz(4e6);
  return p;
}

AnalyticEchoParams bad_cavity()
{
  auto p = oscillatory();
  p.n_spins = 1e9;
  p.kappa = from_hz(4e6);
  p.width = from_hz(150e3);
  return p;
}

// For a Lorentzian continuum the oscillators collapse onto one memory variable
// J(t) = ∫_0^t e^{−Γ_L(t−t')/2} α(t') dt', and the free spin term is
// β e^{−Γ_L|τ−t|/2}. State: {Re α, Im α, Re J, Im J}.
std::vector<cplx> memory_kernel_field(const AnalyticEchoParams &p, const std::vector<double> &times)
{
  namespace ode = boost::numeric::odeint;
  using state = std::array<double, 4>;
  const double h = 0.5 * p.width;
  const double ng = p.n_spins * p.g_eff;
  auto rhs = [&](const state &x, state &dx, double t) {
    const cplx a{x[0], x[1]}, j{x[2], x[3]};
    const cplx free = p.beta * std::exp(-h * std::abs(p.tau - t));
    const cplx da = -0.5 * p.kappa * a - cplx{0.0, 1.0} * ng * free - ng * p.g_eff * j;
    const cplx dj = a - h * j;
    dx = {da.real(), da.imag(), dj.real(), dj.imag()};
  };
  state x{};
  double t = 0.0;
  std::vector<cplx> out;
  for (double target : times) {
    if (target > t) {
      // Restart at τ, where the forcing has a kink.
      if (t < p.tau && target > p.tau) {
        ode::integrate_adaptive(ode::make_controlled<ode::runge_kutta_dopri5<state>>(1e-14, 1e-12), rhs, x, t,
                                p.tau, 1e-10);
        t = p.tau;
      }
      ode::integrate_adaptive(ode::make_controlled<ode::runge_kutta_dopri5<state>>(1e-14, 1e-12), rhs, x, t, target,
                              1e-10);
      t = target;
    }
    out.emplace_back(x[0], x[1]);
  }
  return out;
}

double peak_relative_error(const std::vector<cplx> &a, const std::vector<cplx> &ref)
{
  double peak = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    peak = std::max(peak, std::abs(ref[i]));
    worst = std::max(worst, std::abs(a[i] - ref[i]));
  }
  return worst / peak;
}

std::vector<double> grid(double t0, double t1, std::size_t n)
{
  std::vector<double> t(n + 1);
  for (std::size_t i = 0; i <= n; ++i) t[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n);
  return t;
}

int interior_maxima(const std::vector<double> &y)
{
  int n = 0;
  for (std::size_t i = 1; i + 1 < y.size(); ++i) n += y[i] > y[i - 1] && y[i] > y[i + 1];
  return n;
}

} // namespace

TEST_CASE("closed form matches the memory-kernel equations in every regime")
{
  for (const auto &p : {oscillatory(), cavity_dominated(), bad_cavity()}) {
    auto times = grid(0.0, p.tau + 15e-6, 3000);
    times.push_back(p.tau);
    std::sort(times.begin(), times.end());
    const auto ref = memory_kernel_field(p, times);
    std::vector<cplx> closed;
    for (double t : times) closed.push_back(eval_echo_closed_form(p, t));
    CHECK(peak_relative_error(closed, ref) < 1e-7);
  }
}

TEST_CASE("regime classification")
{
  CHECK(classify_regime(oscillatory()).regime == Regime::Oscillatory);
  CHECK(classify_regime(cavity_dominated()).regime == Regime::CavityDominated);
  CHECK(classify_regime(bad_cavity()).regime == Regime::SymmetricBadCavity);
  for (double mhz : {0.1, 0.5, 1.0}) {
    auto p = oscillatory();
    p.width = from_hz(mhz * 1e6);
    CHECK(classify_regime(p).zeta_sq > 0.0);
  }
  auto g = oscillatory();
  g.shape = Distribution::Gaussian;
  CHECK_THROWS_AS(classify_regime(g), std::invalid_argument);
}

TEST_CASE("weak coupling recovers the bare decay rates")
{
  for (const auto &base : {cavity_dominated(), bad_cavity()}) {
    auto p = base;
    p.n_spins = 1.0;
    const auto r = classify_regime(p);
    const double lo = std::min(r.sigma_plus.real(), r.sigma_minus.real());
    const double hi = std::max(r.sigma_plus.real(), r.sigma_minus.real());
    CHECK(lo == doctest::Approx(0.5 * std::min(p.width, p.kappa)).epsilon(1e-6));
    CHECK(hi == doctest::Approx(0.5 * std::max(p.width, p.kappa)).epsilon(1e-6));
    CHECK(r.sigma_plus.imag() == doctest::Approx(0.0));
  }
}

TEST_CASE("late-time decay follows the slow rate")
{
  for (const auto &p : {cavity_dominated(), bad_cavity()}) {
    const auto r = classify_regime(p);
    const double slow = std::min(r.sigma_plus.real(), r.sigma_minus.real());
    const double t = p.tau + 30.0 / slow;
    const double h = 1.0 / slow;
    const double slope = (std::log(std::abs(eval_echo_closed_form(p, t + h))) -
                          std::log(std::abs(eval_echo_closed_form(p, t)))) / h;
    CHECK(-slope == doctest::Approx(slow).epsilon(1e-6));
  }
}

TEST_CASE("oscillatory regime rings, overdamped regimes do not")
{
  auto count = [](const AnalyticEchoParams &p) {
    std::vector<double> n;
    for (double t : grid(p.tau, p.tau + 20e-6, 20000)) n.push_back(std::norm(eval_echo_closed_form(p, t)));
    return interior_maxima(n);
  };
  CHECK(count(oscillatory()) >= 2);
  CHECK(count(cavity_dominated()) <= 1);
  CHECK(count(bad_cavity()) <= 1);
}

TEST_CASE("rise before the rephasing time has slope Gamma_L / 2")
{
  const auto p = oscillatory();
  for (double t : {10e-6, 30e-6, 44e-6}) {
    const double h = 1e-7;
    const double slope =
        (std::log(std::abs(eval_echo_closed_form(p, t + h))) - std::log(std::abs(eval_echo_closed_form(p, t)))) / h;
    CHECK(slope == doctest::Approx(0.5 * p.width).epsilon(1e-6));
  }
}

TEST_CASE("field is continuous at tau and has the stated amplitude")
{
  const auto p = oscillatory();
  const double eps = 1e-13;
  const cplx before = eval_echo_closed_form(p, p.tau - eps);
  const cplx after = eval_echo_closed_form(p, p.tau + eps);
  CHECK(std::abs(before - after) < 1e-6 * std::abs(before));

  const double gl = p.width;
  const double expected = 2.0 * p.beta * p.n_spins * gl /
                          (std::sqrt(2.0 * std::numbers::pi) * (gl * gl + p.kappa * gl + 2.0 * p.g_eff * p.g_eff * p.n_spins));
  CHECK(std::abs(eval_echo_closed_form(p, p.tau, FieldNormalization::Unscaled)) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(eval_echo_closed_form(p, p.tau)) ==
        doctest::Approx(expected * p.g_eff * std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("field is linear in beta and vanishes without excitation")
{
  auto p = oscillatory();
  p.beta = 0.0;
  CHECK(eval_echo_closed_form(p, p.tau + 1e-6) == cplx{});
  p.beta = 0.3;
  const cplx a1 = eval_echo_closed_form(p, p.tau + 2e-6);
  p.beta = 0.9;
  const cplx a3 = eval_echo_closed_form(p, p.tau + 2e-6);
  CHECK(std::abs(a3 - 3.0 * a1) < 1e-12 * std::abs(a3));
}

TEST_CASE("branch point raises")
{
  auto p = oscillatory();
  // 16 g² N = (Γ_L − κ)²
  p.n_spins = std::pow(p.width - p.kappa, 2) / (16.0 * p.g_eff * p.g_eff);
  CHECK(std::abs(classify_regime(p).zeta_sq) < 1e-6 * p.width * p.width);
  CHECK_THROWS_AS(eval_echo_closed_form(p, p.tau + 1e-6), BranchPointError);
  p.n_spins *= 1.001;
  CHECK_NOTHROW(eval_echo_closed_form(p, p.tau + 1e-6));
}

TEST_CASE("peak photon number grows with N")
{
  auto p = oscillatory();
  p.width = from_hz(4e6);
  const auto pts = superradiant_scaling(p, log_space(1e8, 1e10, 6));
  REQUIRE(pts.size() == 6);
  for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i].peak > pts[i - 1].peak);

  // The refined peak is not beaten by a fine scan.
  const auto peak = closed_form_peak(p);
  for (double t : grid(p.tau, p.tau + 5e-6, 50000)) CHECK(std::norm(eval_echo_closed_form(p, t)) <= peak.photons * (1 + 1e-12));
}

TEST_CASE("log_space endpoints and ratios")
{
  const auto v = log_space(1e8, 1e10, 5);
  CHECK(v.front() == 1e8);
  CHECK(v.back() == 1e10);
  for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] / v[i - 1] == doctest::Approx(std::sqrt(10.0)));
  CHECK_THROWS_AS(log_space(0.0, 1.0, 3), std::invalid_argument);
}

TEST_CASE("linear time-domain model reproduces the closed form")
{
  const auto p = oscillatory();
  const double t_end = 60e-6;
  RecordSettings rec;
  rec.stride = 10e-9;
  const auto ens = sample_ensemble(p.physical(), 10000, 0, Sampling::Stratified);
  const auto sim = simulate_linear_hp(p, ens, t_end, {0.0, Scheme::SplitStep}, rec);
  double peak = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < sim.size(); ++i) {
    const double ref = std::norm(eval_echo_closed_form(p, sim.times[i]));
    peak = std::max(peak, ref);
    worst = std::max(worst, std::abs(sim.photon_number[i] - ref));
  }
  CHECK(worst / peak < 1e-2);

  const auto finer = simulate_linear_hp(p, sample_ensemble(p.physical(), 40000, 0, Sampling::Stratified), t_end,
                                        {0.0, Scheme::SplitStep}, rec);
  const auto a = std::max_element(sim.photon_number.begin(), sim.photon_number.end());
  const auto b = std::max_element(finer.photon_number.begin(), finer.photon_number.end());
  CHECK(*a == doctest::Approx(*b).epsilon(0.02));
}

TEST_CASE("parameter validation and JSON round trip")
{
  auto p = oscillatory();
  const auto q = analytic_params_from_json(to_json(p));
  CHECK(q.width == p.width);
  CHECK(q.kappa == p.kappa);
  CHECK(q.n_spins == p.n_spins);
  p.n_spins = 0.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = oscillatory();
  p.gamma_hp = 1.0;
  CHECK_THROWS_AS(eval_echo_closed_form(p, 1e-6), std::invalid_argument);
}
