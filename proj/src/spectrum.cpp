#include "echotrain/spectrum.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fftw3.h>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

namespace echotrain {

namespace {

using cplx = std::complex<double>;
constexpr cplx I{0.0, 1.0};
const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

// `scale` is the typical magnitude of the line integral, 1/width; far off
// resonance the integral is much smaller and its L1 norm alone is too strict.
cplx integrate(const auto &f, double a, double b, double scale, const QuadratureSettings &quad, const char *what)
{
  double error = 0.0, l1 = 0.0;
  const cplx value =
      boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, quad.max_depth, quad.rel_tol, &error, &l1);
  // The requested tolerance steers the refinement; only a gross miss, an
  // error estimate above sqrt(rel_tol) of max(L1 norm, scale), counts as failure.
  if (!(error <= std::sqrt(quad.rel_tol) * std::max(l1, scale)) && error > 1e-300) {
    std::ostringstream msg;
    msg << what << ": quadrature on [" << a << ", " << b << "] did not converge (error estimate " << error
        << ", L1 norm " << l1
        << ", requested relative tolerance " << quad.rel_tol << ")";
    throw QuadratureError(msg.str(), error);
  }
  return value;
}

// Sum of adaptive integrals over [lo, hi] split at `breaks` and into panels
// no wider than `panel`, so that no single panel spans many oscillations.
cplx integrate_panels(const auto &f, double lo, double hi, std::vector<double> breaks, double panel, double scale,
                      const QuadratureSettings &quad, const char *what)
{
  breaks.push_back(lo);
  breaks.push_back(hi);
  std::erase_if(breaks, [&](double x) { return x < lo || x > hi; });
  std::sort(breaks.begin(), breaks.end());
  cplx sum{};
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i], b = breaks[i + 1];
    if (b <= a) continue;
    const auto pieces = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((b - a) / panel)));
    const double h = (b - a) / static_cast<double>(pieces);
    for (std::size_t j = 0; j < pieces; ++j) {
      const double x0 = a + static_cast<double>(j) * h;
      sum += integrate(f, x0, j + 1 == pieces ? b : x0 + h, scale, quad, what);
    }
  }
  return sum;
}

// Breakpoints center ± width·4^k up to `reach`, so that a feature of the given
// width is resolved within a few bisections.
void add_graded_breaks(std::vector<double> &breaks, double center, double width, double reach)
{
  breaks.push_back(center);
  for (double d = width; d < reach; d *= 4.0) {
    breaks.push_back(center - d);
    breaks.push_back(center + d);
  }
}

// ∫ f(Δ) e^{iΔτ·use_phase} / (γ + iΔ − iω) dΔ over the continuum line.
cplx line_integral(const AnalyticEchoParams &p, cplx omega, bool use_phase, const QuadratureSettings &quad)
{
  const double tau = use_phase ? p.tau : 0.0;
  auto kernel = [&](double d) { return std::exp(I * (d * tau)) / (p.gamma_hp + I * d - I * omega); };
  const double w = omega.real();
  const double scale = 1.0 / p.fwhm();
  // Panels of two oscillation periods of e^{iΔτ}.
  const double panel = tau > 0.0 ? 4.0 * std::numbers::pi / tau : std::numeric_limits<double>::infinity();
  const double pole_width = p.gamma_hp + omega.imag();

  if (p.shape == Distribution::Lorentzian) {
    const double half = 0.5 * p.width;
    const double fw = p.width;
    auto direct = [&](double d) { return half / std::numbers::pi / (d * d + half * half) * kernel(d); };
    if (tau > 0.0) {
      // The e^{iΔτ} factor makes the far tails cancel: cut at ±X, where the
      // endpoint term f(X)/(Xτ) is below rel_tol/Γ_L, and never closer than
      // 40 Γ_L beyond the kernel pole at Δ = Re ω.
      const double tail = std::max(40.0 * fw, std::cbrt(fw * fw / (2.0 * std::numbers::pi * tau * quad.rel_tol)));
      const double lim = std::abs(w) + tail;
      std::vector<double> breaks;
      add_graded_breaks(breaks, w, pole_width, 2.0 * lim);
      add_graded_breaks(breaks, 0.0, half, 2.0 * lim);
      return integrate_panels(direct, -lim, lim, breaks, panel, scale, quad, "lorentzian line");
    }
    // Central range in Δ, where the kernel pole may be narrow, and the tails
    // through Δ = (Γ_L/2) tan θ, which maps the line onto a uniform density 1/π.
    // Beyond |θ| = π/2 − ε the kernel is bounded by 2ε/Γ_L, so the cut-off
    // tails together contribute at most 4ε²/(πΓ_L); ε is chosen to keep that
    // below the requested tolerance relative to 1/Γ_L.
    const double lim = std::abs(w) + 40.0 * fw;
    auto mapped = [&](double theta) { return kernel(half * std::tan(theta)) / std::numbers::pi; };
    const double edge = 0.5 * std::numbers::pi - 0.5 * std::sqrt(quad.rel_tol);
    const double inner = std::atan(lim / half);
    std::vector<double> breaks;
    add_graded_breaks(breaks, w, pole_width, 2.0 * lim);
    add_graded_breaks(breaks, 0.0, half, 2.0 * lim);
    cplx sum = integrate_panels(direct, -lim, lim, breaks, panel, scale, quad, "lorentzian line");
    if (inner < edge) {
      sum += integrate(mapped, -edge, -inner, scale, quad, "lorentzian tail");
      sum += integrate(mapped, inner, edge, scale, quad, "lorentzian tail");
    }
    return sum;
  }

  const double sigma = p.width;
  const double norm = inv_sqrt_2pi / sigma;
  auto g = [&](double d) {
    const double x = d / sigma;
    return norm * std::exp(-0.5 * x * x) * kernel(d);
  };
  const double lim = quad.gaussian_window * sigma;
  std::vector<double> breaks;
  add_graded_breaks(breaks, w, pole_width, 2.0 * lim);
  add_graded_breaks(breaks, 0.0, sigma, 2.0 * lim);
  return integrate_panels(g, -lim, lim, breaks, panel, scale, quad, "gaussian line");
}

void check_contour(const AnalyticEchoParams &p, cplx omega)
{
  p.validate();
  if (!(p.width > 0.0)) throw std::invalid_argument("spectrum: the line width must be positive");
  if (!std::isfinite(omega.real()) || !std::isfinite(omega.imag()))
    throw std::invalid_argument("spectrum: frequency is not finite");
  if (p.gamma_hp + omega.imag() <= 0.0)
    throw std::invalid_argument("spectrum: need gamma_hp + Im(omega) > 0 for the line integrals to exist");
}

cplx denominator(const AnalyticEchoParams &p, cplx omega, cplx i0)
{
  return 0.5 * p.kappa + I * p.delta_c - I * omega + p.n_spins * p.g_eff * p.g_eff * i0;
}

// The FFTW planner is not thread-safe; execution of a finished plan is.
std::mutex &fftw_planner_mutex()
{
  static std::mutex m;
  return m;
}

struct FftwPlanDeleter {
  void operator()(fftw_plan_s *plan) const
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
};

} // namespace

std::complex<double> eval_spectrum(const AnalyticEchoParams &p, std::complex<double> omega,
                                   const QuadratureSettings &quad)
{
  check_contour(p, omega);
  const cplx i0 = line_integral(p, omega, false, quad);
  const cplx i1 = line_integral(p, omega, true, quad);
  return -I * inv_sqrt_2pi * p.n_spins * p.beta * p.g_eff * i1 / denominator(p, omega, i0);
}

std::vector<std::complex<double>> eval_spectrum(const AnalyticEchoParams &p,
                                                const std::vector<std::complex<double>> &omegas,
                                                const QuadratureSettings &quad)
{
  std::vector<cplx> out(omegas.size());
  tbb::parallel_for(std::size_t{0}, omegas.size(), [&](std::size_t m) { out[m] = eval_spectrum(p, omegas[m], quad); });
  return out;
}

std::complex<double> eval_spectrum(const AnalyticEchoParams &p, const SpinEnsemble &ensemble,
                                   std::complex<double> omega)
{
  p.validate();
  ensemble.validate();
  cplx num{}, den{};
  for (std::size_t k = 0; k < ensemble.size(); ++k) {
    const double d = ensemble.detunings[k];
    const double g = ensemble.couplings[k];
    const cplx inv = 1.0 / (p.gamma_hp + I * d - I * omega);
    num += ensemble.weights[k] * g * std::exp(I * (d * p.tau)) * inv;
    den += ensemble.weights[k] * g * g * inv;
  }
  return -I * inv_sqrt_2pi * p.beta * num / (0.5 * p.kappa + I * p.delta_c - I * omega + den);
}

std::complex<double> cavity_response(const AnalyticEchoParams &p, std::complex<double> omega,
                                     const QuadratureSettings &quad)
{
  if (p.g_eff == 0.0) {
    p.validate();
    return 1.0 / denominator(p, omega, 0.0);
  }
  check_contour(p, omega);
  return 1.0 / denominator(p, omega, line_integral(p, omega, false, quad));
}

namespace {

// Line integrals in the factored form used by the inversion: I₀(ω) and
// B₁(ω) = e^{−iωτ} I₁(ω). Both are smooth in ω on the scale of the line width
// (B₁ up to a term of relative size e^{−Γτ/2}), so they are computed by
// quadrature at Chebyshev nodes in θ = atan(ω/s₀) and interpolated.
class LineInterpolant {
public:
  LineInterpolant(const AnalyticEchoParams &p, double band, double eta, const QuadratureSettings &quad)
    : s0_(p.shape == Distribution::Lorentzian ? 0.5 * p.width : p.width)
    , theta_max_(std::atan(band / s0_))
  {
    auto eval = [&](double x, cplx &i0, cplx &b1) {
      const double w = s0_ * std::tan(theta_max_ * x);
      const cplx omega(w, eta);
      i0 = line_integral(p, omega, false, quad);
      b1 = std::exp(-I * (w * p.tau)) * line_integral(p, omega, true, quad);
    };
    std::size_t n = 65;
    resize(n);
    tbb::parallel_for(std::size_t{0}, n, [&](std::size_t j) { eval(node(j, n), i0_[j], b1_[j]); });
    for (;;) {
      // Doubling the interval count nests the old nodes at even indices.
      const std::size_t m = 2 * n - 1;
      std::vector<cplx> i0(m), b1(m);
      for (std::size_t j = 0; j < n; ++j) {
        i0[2 * j] = i0_[j];
        b1[2 * j] = b1_[j];
      }
      tbb::parallel_for(std::size_t{0}, n - 1,
                        [&](std::size_t j) { eval(node(2 * j + 1, m), i0[2 * j + 1], b1[2 * j + 1]); });
      double scale = 0.0, miss = 0.0;
      for (std::size_t j = 0; j < m; ++j) scale = std::max({scale, std::abs(i0[j]), std::abs(b1[j])});
      for (std::size_t j = 1; j < m; j += 2) {
        cplx a0, a1;
        interpolate(node(j, m), a0, a1);
        miss = std::max({miss, std::abs(a0 - i0[j]), std::abs(a1 - b1[j])});
      }
      i0_ = std::move(i0);
      b1_ = std::move(b1);
      // The node values carry quadrature noise near rel_tol.
      if (miss <= 10.0 * quad.rel_tol * scale) break;
      if (m > max_nodes) {
        std::ostringstream msg;
        msg << "spectrum interpolation did not converge with " << m << " nodes (relative mismatch "
            << miss / scale << ")";
        throw QuadratureError(msg.str(), miss / scale);
      }
      n = m;
    }
  }

  std::size_t nodes() const { return i0_.size(); }

  void operator()(double omega, cplx &i0, cplx &b1) const
  {
    interpolate(std::clamp(std::atan(omega / s0_) / theta_max_, -1.0, 1.0), i0, b1);
  }

private:
  static constexpr std::size_t max_nodes = 4097;

  static double node(std::size_t j, std::size_t n)
  {
    return std::cos(std::numbers::pi * static_cast<double>(j) / static_cast<double>(n - 1));
  }

  void resize(std::size_t n)
  {
    i0_.assign(n, {});
    b1_.assign(n, {});
  }

  // Barycentric interpolation on Chebyshev points of the second kind.
  void interpolate(double x, cplx &i0, cplx &b1) const
  {
    const std::size_t n = i0_.size();
    cplx num0{}, num1{};
    double den = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double xj = node(j, n);
      const double diff = x - xj;
      if (diff == 0.0) {
        i0 = i0_[j];
        b1 = b1_[j];
        return;
      }
      double w = (j % 2 == 0 ? 1.0 : -1.0) / diff;
      if (j == 0 || j + 1 == n) w *= 0.5;
      num0 += w * i0_[j];
      num1 += w * b1_[j];
      den += w;
    }
    i0 = num0 / den;
    b1 = num1 / den;
  }

  double s0_;
  double theta_max_;
  std::vector<cplx> i0_, b1_;
};

} // namespace

Trajectory invert_spectrum(const AnalyticEchoParams &p, double t_end, const InversionSettings &settings)
{
  p.validate();
  if (!(t_end > 0.0)) throw std::invalid_argument("invert_spectrum: t_end must be positive");
  if (settings.points < 16) throw std::invalid_argument("invert_spectrum: too few points");
  check_contour(p, {0.0, 1.0});

  double period = settings.period;
  if (period == 0.0) {
    double rate = 0.5 * p.kappa;
    if (p.shape == Distribution::Lorentzian) {
      const auto r = classify_regime(p);
      rate = std::min(r.sigma_plus.real(), r.sigma_minus.real());
    }
    rate += p.gamma_hp;
    period = std::max(3.0 * p.tau, 2.0 * p.tau + (rate > 0.0 ? 40.0 / rate : 0.0));
    period = std::max(period, 1.05 * t_end);
  }
  if (!(period > t_end)) throw std::invalid_argument("invert_spectrum: period must exceed t_end");
  const double eta = settings.eta > 0.0 ? settings.eta : 1.0 / period;

  const std::size_t m_total = settings.points;
  const double d_omega = 2.0 * std::numbers::pi / period;
  const LineInterpolant line(p, d_omega * static_cast<double>(m_total / 2), eta, settings.quad);

  const double d_t = period / static_cast<double>(m_total);
  const auto half = static_cast<std::ptrdiff_t>(m_total / 2);
  const double ng2 = p.n_spins * p.g_eff * p.g_eff;
  const cplx source = -I / std::sqrt(2.0 * std::numbers::pi) * p.n_spins * p.beta * p.g_eff;

  // Bin j holds ω_m with m = j for j < M/2 and m = j − M otherwise.
  std::vector<cplx> spec(m_total);
  tbb::parallel_for(std::size_t{0}, m_total, [&](std::size_t j) {
    const auto sj = static_cast<std::ptrdiff_t>(j);
    const auto m = sj < half ? sj : sj - static_cast<std::ptrdiff_t>(m_total);
    const double w = static_cast<double>(m) * d_omega;
    const cplx omega(w, eta);
    cplx i0, b1;
    line(w, i0, b1);
    const cplx den = 0.5 * p.kappa + I * p.delta_c - I * omega + ng2 * i0;
    spec[j] = source * std::exp(I * (w * p.tau)) * b1 / den;
  });

  auto *data = reinterpret_cast<fftw_complex *>(spec.data());
  std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan.reset(fftw_plan_dft_1d(static_cast<int>(m_total), data, data, FFTW_FORWARD, FFTW_ESTIMATE));
  }
  if (!plan) throw std::runtime_error("FFTW plan creation failed");
  fftw_execute(plan.get());

  Trajectory traj;
  const double scale = d_omega / std::sqrt(2.0 * std::numbers::pi);
  for (std::size_t n = 0; n < m_total; ++n) {
    const double t = static_cast<double>(n) * d_t;
    if (t > t_end * (1.0 + 1e-12)) break;
    traj.push_back(t, scale * std::exp(eta * t) * spec[n]);
  }
  traj.meta = {{"model", "spectrum_inversion"},
               {"analytic", to_json(p)},
               {"period", period},
               {"points", m_total},
               {"eta", eta},
               {"interpolation_nodes", line.nodes()},
               {"rel_tol", settings.quad.rel_tol}};
  return traj;
}

} // namespace echotrain
