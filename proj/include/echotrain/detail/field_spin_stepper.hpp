#pragma once

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace echotrain::detail {

// Fixed-step integrator for one cavity mode coupled to N_k classes. The
// per-class equations come from a Model policy:
//
//   struct Model {
//     static constexpr bool has_population;
//     double half_kappa, delta_c;
//     void spin(double ar, double ai, double sr, double si, double z,
//               double det, double g, double &dsr, double &dsi, double &dz) const;
//   };
//
// The field equation is always dα/dt = −(κ/2 + iδ_c)α − iΣ w_k g_k s_k − i·drive.
//
// Storage is structure-of-arrays. Each RK4 stage is a single fused pass that
// evaluates the class derivatives, accumulates the RK weights and writes the
// next stage input. The collective sum is reduced per fixed-size block and
// the block sums are combined pairwise, so the result does not depend on how
// many workers process the blocks.
template <class Model> class FieldSpinStepper {
public:
  static constexpr std::size_t block_size = 2048;
  static constexpr std::size_t parallel_threshold = std::size_t{1} << 15;

  FieldSpinStepper(Model model, std::span<const double> detunings, std::span<const double> couplings,
                   std::span<const double> weights, bool split_rotation)
    : model_(model)
    , n_(detunings.size())
    , det_(detunings.begin(), detunings.end())
    , g_(couplings.begin(), couplings.end())
    , wg_(n_)
    , split_(split_rotation)
    , blocks_((n_ + block_size - 1) / block_size)
    , partial_re_(blocks_)
    , partial_im_(blocks_)
  {
    for (std::size_t k = 0; k < n_; ++k) wg_[k] = weights[k] * couplings[k];
    for (auto *v : {&sr_, &si_, &z_, &tr_, &ti_, &tz_, &accr_, &acci_, &accz_}) v->assign(n_, 0.0);
    parallel_ = n_ >= parallel_threshold && tbb::this_task_arena::max_concurrency() > 1;
  }

  std::size_t size() const { return n_; }
  std::complex<double> alpha() const { return {ar_, ai_}; }
  double sr(std::size_t k) const { return sr_[k]; }
  double si(std::size_t k) const { return si_[k]; }
  double z(std::size_t k) const { return z_[k]; }

  void set_state(std::complex<double> alpha, std::span<const std::complex<double>> s, std::span<const double> z)
  {
    ar_ = alpha.real();
    ai_ = alpha.imag();
    for (std::size_t k = 0; k < n_; ++k) {
      sr_[k] = s[k].real();
      si_[k] = s[k].imag();
      if constexpr (Model::has_population) z_[k] = z[k];
    }
  }

  void get_state(std::complex<double> &alpha, std::vector<std::complex<double>> &s, std::vector<double> &z) const
  {
    alpha = {ar_, ai_};
    s.resize(n_);
    for (std::size_t k = 0; k < n_; ++k) s[k] = {sr_[k], si_[k]};
    if constexpr (Model::has_population) z.assign(z_.begin(), z_.end());
  }

  void step(double h, std::complex<double> drive)
  {
    if (split_) rotate(h);
    rk4(h, drive);
    if (split_) rotate(h);
  }

  // True when every component is finite and |z| <= z_bound.
  bool healthy(double z_bound) const
  {
    if (!std::isfinite(ar_) || !std::isfinite(ai_)) return false;
    for (std::size_t k = 0; k < n_; ++k) {
      if (!std::isfinite(sr_[k]) || !std::isfinite(si_[k])) return false;
      if constexpr (Model::has_population) {
        if (!(std::abs(z_[k]) <= z_bound)) return false;
      }
    }
    return true;
  }

private:
  enum class Stage { First, Second, Third, Fourth };

  // Exact free precession e^{−iΔ h/2}, factors cached per step length.
  void rotate(double h)
  {
    if (h != rot_h_) {
      rot_c_.resize(n_);
      rot_s_.resize(n_);
      for (std::size_t k = 0; k < n_; ++k) {
        rot_c_[k] = std::cos(0.5 * det_[k] * h);
        rot_s_[k] = std::sin(0.5 * det_[k] * h);
      }
      rot_h_ = h;
    }
    for (std::size_t k = 0; k < n_; ++k) {
      const double c = rot_c_[k], s = rot_s_[k];
      const double r = sr_[k], i = si_[k];
      sr_[k] = c * r + s * i;
      si_[k] = c * i - s * r;
    }
  }

  template <Stage S>
  void block_pass(std::size_t b, double in_ar, double in_ai, double h)
  {
    const std::size_t lo = b * block_size;
    const std::size_t hi = std::min(n_, lo + block_size);
    const bool first = S == Stage::First;
    const double *in_r = first ? sr_.data() : tr_.data();
    const double *in_i = first ? si_.data() : ti_.data();
    const double *in_z = first ? z_.data() : tz_.data();
    double sum_r = 0.0, sum_i = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
      const double r = in_r[k], i = in_i[k], zz = in_z[k];
      sum_r += wg_[k] * r;
      sum_i += wg_[k] * i;
      double dr = 0.0, di = 0.0, dz = 0.0;
      model_.spin(in_ar, in_ai, r, i, zz, split_ ? 0.0 : det_[k], g_[k], dr, di, dz);
      if constexpr (S == Stage::First) {
        accr_[k] = dr;
        acci_[k] = di;
        tr_[k] = sr_[k] + 0.5 * h * dr;
        ti_[k] = si_[k] + 0.5 * h * di;
        if constexpr (Model::has_population) {
          accz_[k] = dz;
          tz_[k] = z_[k] + 0.5 * h * dz;
        }
      } else if constexpr (S == Stage::Second || S == Stage::Third) {
        const double c = S == Stage::Second ? 0.5 * h : h;
        accr_[k] += 2.0 * dr;
        acci_[k] += 2.0 * di;
        tr_[k] = sr_[k] + c * dr;
        ti_[k] = si_[k] + c * di;
        if constexpr (Model::has_population) {
          accz_[k] += 2.0 * dz;
          tz_[k] = z_[k] + c * dz;
        }
      } else {
        const double c = h / 6.0;
        sr_[k] += c * (accr_[k] + dr);
        si_[k] += c * (acci_[k] + di);
        if constexpr (Model::has_population) z_[k] += c * (accz_[k] + dz);
      }
    }
    partial_re_[b] = sum_r;
    partial_im_[b] = sum_i;
  }

  static double pairwise(const double *v, std::size_t n)
  {
    if (n == 0) return 0.0;
    if (n == 1) return v[0];
    const std::size_t half = n / 2;
    return pairwise(v, half) + pairwise(v + half, n - half);
  }

  // One fused stage; returns the collective sum Σ w g s of the stage input.
  template <Stage S> std::complex<double> stage(double in_ar, double in_ai, double h)
  {
    if (parallel_) {
      tbb::parallel_for(tbb::blocked_range<std::size_t>(0, blocks_), [&](const tbb::blocked_range<std::size_t> &r) {
        for (std::size_t b = r.begin(); b != r.end(); ++b) block_pass<S>(b, in_ar, in_ai, h);
      });
    } else {
      for (std::size_t b = 0; b < blocks_; ++b) block_pass<S>(b, in_ar, in_ai, h);
    }
    return {pairwise(partial_re_.data(), blocks_), pairwise(partial_im_.data(), blocks_)};
  }

  void field_rhs(double ar, double ai, std::complex<double> sum, std::complex<double> drive, double &dar,
                 double &dai) const
  {
    dar = -model_.half_kappa * ar + model_.delta_c * ai + sum.imag() + drive.imag();
    dai = -model_.half_kappa * ai - model_.delta_c * ar - sum.real() - drive.real();
  }

  void rk4(double h, std::complex<double> drive)
  {
    double k_r = 0.0, k_i = 0.0;
    const double y_r = ar_, y_i = ai_;

    auto sum = stage<Stage::First>(y_r, y_i, h);
    field_rhs(y_r, y_i, sum, drive, k_r, k_i);
    double acc_r = k_r, acc_i = k_i;
    double t_r = y_r + 0.5 * h * k_r, t_i = y_i + 0.5 * h * k_i;

    sum = stage<Stage::Second>(t_r, t_i, h);
    field_rhs(t_r, t_i, sum, drive, k_r, k_i);
    acc_r += 2.0 * k_r;
    acc_i += 2.0 * k_i;
    t_r = y_r + 0.5 * h * k_r;
    t_i = y_i + 0.5 * h * k_i;

    sum = stage<Stage::Third>(t_r, t_i, h);
    field_rhs(t_r, t_i, sum, drive, k_r, k_i);
    acc_r += 2.0 * k_r;
    acc_i += 2.0 * k_i;
    t_r = y_r + h * k_r;
    t_i = y_i + h * k_i;

    sum = stage<Stage::Fourth>(t_r, t_i, h);
    field_rhs(t_r, t_i, sum, drive, k_r, k_i);
    ar_ = y_r + h / 6.0 * (acc_r + k_r);
    ai_ = y_i + h / 6.0 * (acc_i + k_i);
  }

  Model model_;
  std::size_t n_;
  std::vector<double> det_, g_, wg_;
  bool split_;
  bool parallel_ = false;
  std::size_t blocks_;
  std::vector<double> partial_re_, partial_im_;

  double ar_ = 0.0, ai_ = 0.0;
  std::vector<double> sr_, si_, z_;
  std::vector<double> tr_, ti_, tz_;
  std::vector<double> accr_, acci_, accz_;

  double rot_h_ = std::nan("");
  std::vector<double> rot_c_, rot_s_;
};

} // namespace echotrain::detail
