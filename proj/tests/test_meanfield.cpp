#include "echotrain/meanfield.hpp"
#include "echotrain/units.hpp"

#include "doctest.h"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>

using namespace echotrain;
using cplx = std::complex<double>;

namespace {

const cplx I(0.0, 1.0);

PhysicalParams lossless(double g, double n)
{
  PhysicalParams p;
  p.g_single = g;
  p.n_spins = n;
  return p;
}

// Independent right-hand side on a flat real vector [αr, αi, (sr, si, z)_k...].
struct Oracle {
  PhysicalParams p;
  SpinEnsemble e;
  cplx drive{};

  void operator()(const std::vector<double> &x, std::vector<double> &dx, double) const
  {
    const cplx a(x[0], x[1]);
    cplx sum{};
    for (std::size_t k = 0; k < e.size(); ++k) {
      const cplx s(x[2 + 3 * k], x[3 + 3 * k]);
      const double z = x[4 + 3 * k];
      const double g = e.couplings[k];
      sum += e.weights[k] * g * s;
      const cplx ds = -(I * e.detunings[k] + p.gamma / 2 + 2 * p.dephasing) * s + I * g * a * z;
      const double dz = -p.gamma * (1 + z) + (2.0 * I * g * (std::conj(a) * s - a * std::conj(s))).real();
      dx[2 + 3 * k] = ds.real();
      dx[3 + 3 * k] = ds.imag();
      dx[4 + 3 * k] = dz;
    }
    const cplx da = -(I * p.delta_c + p.kappa / 2) * a - I * sum - I * drive;
    dx[0] = da.real();
    dx[1] = da.imag();
  }
};

// Adaptive Dormand-Prince run of the oracle at tight tolerance, restarted at
// every pulse edge, returning |α|² at the record times of `like`.
std::vector<double> oracle_photons(const PhysicalParams &p, const SpinEnsemble &e, const PulseSequence &seq,
                                   const SystemState &init, const Trajectory &like)
{
  namespace ode = boost::numeric::odeint;
  std::vector<double> x(2 + 3 * e.size());
  x[0] = init.alpha.real();
  x[1] = init.alpha.imag();
  for (std::size_t k = 0; k < e.size(); ++k) {
    x[2 + 3 * k] = init.s_minus[k].real();
    x[3 + 3 * k] = init.s_minus[k].imag();
    x[4 + 3 * k] = init.s_z[k];
  }
  // Targets: record times and pulse edges, merged.
  std::vector<std::pair<double, long>> targets;
  for (std::size_t i = 0; i < like.size(); ++i) targets.emplace_back(like.times[i], static_cast<long>(i));
  for (double t : seq.edges()) targets.emplace_back(t, -1);
  std::sort(targets.begin(), targets.end());

  std::vector<double> out(like.size());
  double t = like.times.front();
  for (const auto &[target, id] : targets) {
    if (target > t) {
      Oracle rhs{p, e, seq.drive_at(0.5 * (t + target))};
      auto stepper = ode::make_controlled(1e-13, 1e-13, ode::runge_kutta_dopri5<std::vector<double>>());
      ode::integrate_adaptive(stepper, rhs, x, t, target, (target - t) * 1e-3);
      t = target;
    }
    if (id >= 0) out[static_cast<std::size_t>(id)] = x[0] * x[0] + x[1] * x[1];
  }
  return out;
}

double peak(const std::vector<double> &v) { return *std::max_element(v.begin(), v.end()); }

} // namespace

TEST_CASE("ground state without drive is a fixed point")
{
  PhysicalParams p = lossless(from_hz(8.0), 1e10);
  p.kappa = from_hz(150e3);
  p.dephasing = from_hz(2.5e3);
  p.gamma = 10.0;
  const auto e = make_ensemble(p, {-1e6, 0.0, 3e6}, {p.g_single, p.g_single, p.g_single}, {3e9, 3e9, 4e9});
  const auto d = derivative(SystemState::ground(3), e, p, {});
  CHECK(d.alpha == cplx{});
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(d.s_minus[k] == cplx{});
    CHECK(d.s_z[k] == 0.0);
  }
}

TEST_CASE("decoupled single class")
{
  PhysicalParams p = lossless(0.0, 1.0);
  p.gamma = 3.0;
  p.dephasing = 0.7;
  const double delta = 2.5;
  const auto e = make_ensemble(p, {delta}, {0.0}, {1.0});
  SystemState s = SystemState::ground(1);
  s.alpha = 1.0;
  s.s_minus[0] = {0.3, -0.1};
  s.s_z[0] = 0.2;
  const auto d = derivative(s, e, p, {});
  CHECK(d.alpha == cplx{});
  const cplx expect = -(I * delta + p.gamma / 2 + 2 * p.dephasing) * s.s_minus[0];
  CHECK(std::abs(d.s_minus[0] - expect) < 1e-15);
}

TEST_CASE("excitation number is a constant of the lossless undriven equations")
{
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const PhysicalParams p = lossless(from_hz(8.0), 1e6);
  std::vector<double> det, g, w;
  for (int k = 0; k < 20; ++k) {
    det.push_back(1e6 * u(rng));
    g.push_back(50.0 * (1.5 + u(rng)));
    w.push_back(5e4);
  }
  const auto e = make_ensemble(p, det, g, w);
  for (int trial = 0; trial < 10; ++trial) {
    SystemState s = SystemState::ground(20);
    s.alpha = {100 * u(rng), 100 * u(rng)};
    for (int k = 0; k < 20; ++k) {
      s.s_minus[k] = {0.3 * u(rng), 0.3 * u(rng)};
      s.s_z[k] = 0.5 * u(rng);
    }
    const auto d = derivative(s, e, p, {});
    // dE/dt = 2 Re(α* dα) + Σ w dz / 2
    double rate = 2.0 * (std::conj(s.alpha) * d.alpha).real();
    double scale = 2.0 * std::abs(s.alpha) * std::abs(d.alpha);
    for (int k = 0; k < 20; ++k) {
      rate += 0.5 * w[k] * d.s_z[k];
      scale += 0.5 * w[k] * std::abs(d.s_z[k]);
    }
    CHECK(std::abs(rate) < 1e-12 * scale);
  }
}

TEST_CASE("derivative rejects malformed input")
{
  const PhysicalParams p = lossless(1.0, 2.0);
  const auto e = make_ensemble(p, {0.0, 1.0}, {1.0, 1.0}, {1.0, 1.0});
  CHECK_THROWS_AS(derivative(SystemState::ground(3), e, p, {}), std::invalid_argument);
  auto s = SystemState::ground(2);
  s.alpha = {std::nan(""), 0.0};
  CHECK_THROWS_AS(derivative(s, e, p, {}), std::invalid_argument);
}

TEST_CASE("no drive from the ground state stays dark")
{
  PhysicalParams p = lossless(from_hz(8.0), 1e10);
  p.kappa = from_hz(150e3);
  p.inhomogeneous_fwhm = from_hz(4e6);
  const auto e = sample_ensemble(p, 64, 1);
  RecordSettings rec;
  rec.stride = 1e-7;
  rec.bloch_classes = {0, 63};
  const auto traj = simulate(e, p, PulseSequence({}, 5e-6), {0.0, Scheme::Rk4}, rec);
  for (double n : traj.photon_number) CHECK(n == 0.0);
  for (const auto &b : traj.bloch) {
    for (double z : b.sz) CHECK(z == -1.0);
  }
}

TEST_CASE("single resonant class matches a dense-output reference")
{
  const PhysicalParams p = lossless(from_hz(8.0), 1e4);
  const auto e = make_ensemble(p, {0.0}, {p.g_single}, {1e4});
  SystemState init = SystemState::ground(1);
  init.s_minus[0] = 0.5;
  init.s_z[0] = 0.0;
  const PulseSequence none({}, 200e-6);
  for (auto scheme : {Scheme::Rk4, Scheme::SplitStep}) {
    const auto traj = simulate(e, p, none, {2e-8, scheme}, {1e-6, {}}, std::optional<SystemState>(init));
    const auto ref = oracle_photons(p, e, none, init, traj);
    REQUIRE(ref.size() == traj.size());
    const double scale = peak(ref);
    REQUIRE(scale > 1.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      worst = std::max(worst, std::abs(std::sqrt(traj.photon_number[i]) - std::sqrt(ref[i])) / std::sqrt(scale));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("driven Hahn run on a small ensemble matches the reference")
{
  PhysicalParams p = lossless(from_hz(8.0), 1e10);
  p.kappa = from_hz(150e3);
  p.dephasing = from_hz(2.5e3);
  p.gamma = 50.0;
  const auto e = make_ensemble(p, {-from_hz(1e6), 0.0, from_hz(0.4e6), from_hz(2e6)}, std::vector<double>(4, p.g_single),
                               {2e9, 3e9, 3e9, 2e9});
  HahnTiming h;
  h.tau = 5e-6;
  h.amplitude = 5e9;
  h.t_end = 15e-6;
  const auto seq = hahn_sequence(h);
  for (auto scheme : {Scheme::Rk4, Scheme::SplitStep}) {
    // Strang splitting is second order, so it gets a finer step.
    const double dt = scheme == Scheme::Rk4 ? 1e-9 : 2.5e-10;
    const auto traj = simulate(e, p, seq, {dt, scheme}, {5e-8, {}});
    const auto ref = oracle_photons(p, e, seq, SystemState::ground(4), traj);
    REQUIRE(ref.size() == traj.size());
    const double scale = peak(ref);
    double worst = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(traj.photon_number[i] - ref[i]));
    CHECK(worst / scale < 1e-6);
  }
}

TEST_CASE("RK4 is fourth order on the decoupled cavity")
{
  PhysicalParams p = lossless(0.0, 1.0);
  p.kappa = 2.0;
  const auto e = make_ensemble(p, {0.0}, {0.0}, {1.0});
  SystemState init = SystemState::ground(1);
  init.alpha = 1.0;
  auto error = [&](double dt) {
    const auto traj = simulate(e, p, PulseSequence({}, 10.0), {dt, Scheme::Rk4}, {1.0, {}}, std::optional<SystemState>(init));
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.size(); ++i)
      worst = std::max(worst, std::abs(traj.alpha_re[i] - std::exp(-0.5 * p.kappa * traj.times[i])));
    return worst;
  };
  const double coarse = error(0.5), fine = error(0.05);
  const double ratio = coarse / fine;
  CHECK(ratio > 0.5e4);
  CHECK(ratio < 2e4);
}

TEST_CASE("lossless undriven dynamics conserve excitation and Bloch norms")
{
  PhysicalParams p = lossless(from_hz(8.0), 1e10);
  p.inhomogeneous_fwhm = from_hz(1e6);
  const auto e = sample_ensemble(p, 200, 3, Sampling::Systematic);
  SystemState init = ideal_initial_state(e, 10e-6, 0.5);
  RecordSettings rec;
  rec.stride = 1e-7;
  for (std::size_t k = 0; k < 200; k += 10) rec.bloch_classes.push_back(k);
  SystemState state = init;
  const auto traj = simulate(e, p, PulseSequence({}, 100e-6), {2e-9, Scheme::SplitStep}, rec, state);

  // Excitation |α|² + Σ w (1 + z)/2 over every class, initial against final.
  auto excitation = [&](const SystemState &s) {
    double sum = std::norm(s.alpha);
    for (std::size_t k = 0; k < e.size(); ++k) sum += e.weights[k] * 0.5 * (1.0 + s.s_z[k]);
    return sum;
  };
  const double e0 = excitation(init), e1 = excitation(state);
  CHECK(std::abs(e1 - e0) / e0 < 1e-6);
  CHECK(peak(traj.photon_number) > 1e3); // the field was actually exchanged

  for (const auto &b : traj.bloch) {
    const double n0 = b.sx[0] * b.sx[0] + b.sy[0] * b.sy[0] + b.sz[0] * b.sz[0];
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.size(); ++i)
      worst = std::max(worst, std::abs(b.sx[i] * b.sx[i] + b.sy[i] * b.sy[i] + b.sz[i] * b.sz[i] - n0) / n0);
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("Bloch norm is conserved with cavity loss when spins are lossless")
{
  PhysicalParams p = lossless(from_hz(8.0), 1e10);
  p.kappa = from_hz(150e3);
  p.inhomogeneous_fwhm = from_hz(2e6);
  const auto e = sample_ensemble(p, 100, 5, Sampling::Systematic);
  HahnTiming h;
  h.tau = 4e-6;
  h.t_end = 12e-6;
  RecordSettings rec{5e-8, {0, 25, 50, 75, 99}};
  const auto traj = simulate(e, p, hahn_sequence(h), {2e-9, Scheme::SplitStep}, rec);
  for (const auto &b : traj.bloch) {
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.size(); ++i)
      worst = std::max(worst, std::abs(b.sx[i] * b.sx[i] + b.sy[i] * b.sy[i] + b.sz[i] * b.sz[i] - 1.0));
    CHECK(worst < 1e-6);
  }
}

namespace {

struct HahnCase {
  PhysicalParams p;
  SpinEnsemble e;
  PulseSequence seq;
};

HahnCase small_hahn()
{
  PhysicalParams p = lossless(from_hz(8.0), 1e10);
  p.kappa = from_hz(150e3);
  p.dephasing = from_hz(2.5e3);
  p.inhomogeneous_fwhm = from_hz(4e6);
  HahnTiming h;
  h.tau = 5e-6;
  h.amplitude = 6.5e10;
  h.t_end = 16e-6;
  return {p, sample_ensemble(p, 300, 11, Sampling::Systematic), hahn_sequence(h)};
}

} // namespace

TEST_CASE("dt halving and the two schemes agree on a converged Hahn run")
{
  const auto c = small_hahn();
  const RecordSettings rec{5e-8, {}};
  const auto halving = convergence_check(c.e, c.p, c.seq, {2e-9, Scheme::SplitStep}, rec);
  CHECK(halving.dt == 2e-9);
  CHECK(halving.max_deviation < 1e-4);
  const auto split = simulate(c.e, c.p, c.seq, {1e-9, Scheme::SplitStep}, rec);
  const auto rk4 = simulate(c.e, c.p, c.seq, {1e-9, Scheme::Rk4}, rec);
  CHECK(max_relative_deviation(split, rk4) < 1e-4);
}

TEST_CASE("global drive phase only rotates the field")
{
  const auto c = small_hahn();
  const RecordSettings rec{5e-8, {}};
  const IntegratorSettings integ{2e-9, Scheme::SplitStep};
  const auto base = simulate(c.e, c.p, c.seq, integ, rec);
  const double theta = 0.731;
  const auto turned = simulate(c.e, c.p, c.seq.with_phase_offset(theta), integ, rec);
  const double scale = peak(base.photon_number);
  double worst = 0.0, worst_field = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    worst = std::max(worst, std::abs(base.photon_number[i] - turned.photon_number[i]));
    const cplx a(base.alpha_re[i], base.alpha_im[i]), b(turned.alpha_re[i], turned.alpha_im[i]);
    worst_field = std::max(worst_field, std::abs(b - a * std::polar(1.0, theta)));
  }
  CHECK(worst / scale < 1e-10);
  CHECK(worst_field / std::sqrt(scale) < 1e-10);
}

TEST_CASE("repeated runs are bit-identical")
{
  const auto c = small_hahn();
  const RecordSettings rec{5e-8, {0, 150}};
  const auto a = simulate(c.e, c.p, c.seq, {2e-9, Scheme::SplitStep}, rec);
  const auto b = simulate(c.e, c.p, c.seq, {2e-9, Scheme::SplitStep}, rec);
  CHECK(a.photon_number == b.photon_number);
  CHECK(a.alpha_re == b.alpha_re);
  CHECK(a.bloch[1].sz == b.bloch[1].sz);
}

TEST_CASE("instability aborts instead of clamping")
{
  const auto c = small_hahn();
  CHECK_THROWS_AS(simulate(c.e, c.p, c.seq, {2e-6, Scheme::SplitStep}, {1e-6, {}}), NumericalInstability);
}

TEST_CASE("time step resolution")
{
  const auto c = small_hahn();
  // RK4 must resolve the largest detuning.
  CHECK_THROWS_AS(simulate(c.e, c.p, c.seq, {1e-7, Scheme::Rk4}, {1e-6, {}}), std::invalid_argument);
  const double dt = resolve_time_step(c.e, c.p, {0.0, Scheme::Rk4});
  CHECK(dt == doctest::Approx(0.3 / c.e.max_abs_detuning()));
  const double split = resolve_time_step(c.e, c.p, {0.0, Scheme::SplitStep});
  CHECK(split == doctest::Approx(0.3 / c.e.collective_coupling()));
  CHECK(parse_scheme(to_string(Scheme::SplitStep)) == Scheme::SplitStep);
  CHECK_THROWS_AS(parse_scheme("euler"), std::invalid_argument);
}

TEST_CASE("record settings are validated")
{
  const auto c = small_hahn();
  RecordSettings rec{1e-7, {}};
  for (std::size_t k = 0; k < 65; ++k) rec.bloch_classes.push_back(k);
  CHECK_THROWS_AS(simulate(c.e, c.p, c.seq, {2e-9, Scheme::SplitStep}, rec), std::invalid_argument);
  CHECK_THROWS_AS(simulate(c.e, c.p, c.seq, {2e-9, Scheme::SplitStep}, {1e-7, {300}}), std::invalid_argument);
  CHECK_THROWS_AS(simulate(c.e, c.p, c.seq, {2e-9, Scheme::SplitStep}, {0.0, {}}), std::invalid_argument);
}

TEST_CASE("record grid includes both ends and the stride")
{
  const auto c = small_hahn();
  const auto traj = simulate(c.e, c.p, c.seq, {2e-9, Scheme::SplitStep}, {1e-6, {}});
  CHECK(traj.times.front() == 0.0);
  CHECK(traj.times.back() == 16e-6);
  CHECK(traj.size() == 17);
  CHECK(traj.times[3] == doctest::Approx(3e-6));
}

TEST_CASE("ideal initialization")
{
  PhysicalParams p = lossless(from_hz(8.0), 1e10);
  p.kappa = from_hz(150e3);
  p.inhomogeneous_fwhm = from_hz(4e6);
  const auto e = sample_ensemble(p, 400, 2, Sampling::Systematic);
  const double tau = 5e-6;

  SUBCASE("initial Bloch vectors are normalized and rephase at tau")
  {
    const auto s = ideal_initial_state(e, tau, 0.6);
    for (std::size_t k = 0; k < e.size(); ++k) {
      CHECK(4.0 * std::norm(s.s_minus[k]) + s.s_z[k] * s.s_z[k] == doctest::Approx(1.0));
      // Free precession e^{−iΔτ} brings every class back to the real axis.
      const cplx back = s.s_minus[k] * std::polar(1.0, -e.detunings[k] * tau);
      CHECK(std::abs(back - 0.3) < 1e-12);
    }
  }
  SUBCASE("emission peaks near tau and the spins lose excitation there")
  {
    RecordSettings rec{2e-8, {200}};
    const auto traj = simulate_ideal_init(e, p, {tau, 1.0, 2 * tau}, {2e-9, Scheme::SplitStep}, rec);
    const auto it = std::max_element(traj.photon_number.begin(), traj.photon_number.end());
    const double t_peak = traj.times[static_cast<std::size_t>(it - traj.photon_number.begin())];
    CHECK(std::abs(t_peak - tau) < 0.1 * tau);
    const auto &sz = traj.bloch[0].sz;
    CHECK(sz.front() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sz.back() < -0.5); // the classes returned excitation to the field around tau
  }
  SUBCASE("weak excitation is linear: peak scales as beta squared")
  {
    RecordSettings rec{2e-8, {}};
    auto peak_at = [&](double beta) {
      return peak(simulate_ideal_init(e, p, {tau, beta, 2 * tau}, {2e-9, Scheme::SplitStep}, rec).photon_number);
    };
    CHECK(peak_at(2e-3) / peak_at(1e-3) == doctest::Approx(4.0).epsilon(0.01));
  }
  SUBCASE("a zero-width line gives a single collective transient")
  {
    PhysicalParams q = p;
    q.inhomogeneous_fwhm = 0.0;
    const auto flat = sample_ensemble(q, 10, 0);
    const auto traj = simulate_ideal_init(flat, q, {tau, 0.5, 2 * tau}, {2e-9, Scheme::SplitStep}, {2e-8, {}});
    const auto it = std::max_element(traj.photon_number.begin(), traj.photon_number.end());
    CHECK(traj.times[static_cast<std::size_t>(it - traj.photon_number.begin())] < 0.2 * tau);
  }
  CHECK_THROWS_AS(ideal_initial_state(e, tau, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(simulate_ideal_init(e, p, {tau, 1.0, tau}, {2e-9, Scheme::SplitStep}, {1e-7, {}}),
                  std::invalid_argument);
}
