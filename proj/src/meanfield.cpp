#include "echotrain/meanfield.hpp"

#include "echotrain/detail/field_spin_stepper.hpp"
#include "echotrain/detail/time_grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace echotrain {

namespace {

struct MeanFieldModel {
  static constexpr bool has_population = true;
  double half_kappa = 0.0;
  double delta_c = 0.0;
  double gamma = 0.0;
  double coherence_decay = 0.0; // γ/2 + 2Γ

  void spin(double ar, double ai, double sr, double si, double z, double det, double g, double &dsr, double &dsi,
            double &dz) const
  {
    dsr = -coherence_decay * sr + det * si - g * z * ai;
    dsi = -coherence_decay * si - det * sr + g * z * ar;
    // 2i g (α* s − α s*) = −4 g Im(α* s)
    dz = -gamma * (1.0 + z) - 4.0 * g * (ar * si - ai * sr);
  }
};

MeanFieldModel make_model(const PhysicalParams &p)
{
  return {0.5 * p.kappa, p.delta_c, p.gamma, 0.5 * p.gamma + 2.0 * p.dephasing};
}

bool all_finite(const SystemState &s)
{
  if (!std::isfinite(s.alpha.real()) || !std::isfinite(s.alpha.imag()) || !std::isfinite(s.t)) return false;
  for (const auto &v : s.s_minus) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return std::all_of(s.s_z.begin(), s.s_z.end(), [](double z) { return std::isfinite(z); });
}

void check_record_settings(const RecordSettings &record, std::size_t n_classes)
{
  if (!(record.stride > 0.0)) throw std::invalid_argument("record stride must be positive");
  if (record.bloch_classes.size() > max_bloch_classes)
    throw std::invalid_argument("at most " + std::to_string(max_bloch_classes) + " Bloch classes can be recorded");
  for (auto k : record.bloch_classes) {
    if (k >= n_classes) throw std::invalid_argument("Bloch class index " + std::to_string(k) + " out of range");
  }
}

nlohmann::json run_meta(const SpinEnsemble &ensemble, const PhysicalParams &params,
                        const IntegratorSettings &integrator, double dt, const RecordSettings &record)
{
  nlohmann::json integ = to_json(integrator);
  integ["dt_used"] = dt;
  return {{"params", to_json(params)},
          {"ensemble_seed", ensemble.seed},
          {"n_classes", ensemble.size()},
          {"integrator", integ},
          {"record_stride", record.stride},
          {"bloch_classes", record.bloch_classes}};
}

} // namespace

SystemState SystemState::ground(std::size_t n_classes)
{
  SystemState s;
  s.s_minus.assign(n_classes, {});
  s.s_z.assign(n_classes, -1.0);
  return s;
}

StateDerivative derivative(const SystemState &state, const SpinEnsemble &ensemble, const PhysicalParams &params,
                           std::complex<double> drive)
{
  const auto n = ensemble.size();
  if (state.s_minus.size() != n || state.s_z.size() != n)
    throw std::invalid_argument("derivative: state and ensemble sizes differ");
  if (!all_finite(state) || !std::isfinite(drive.real()) || !std::isfinite(drive.imag()))
    throw std::invalid_argument("derivative: non-finite input");

  const auto model = make_model(params);
  StateDerivative d;
  d.s_minus.resize(n);
  d.s_z.resize(n);
  std::complex<double> sum{};
  for (std::size_t k = 0; k < n; ++k) {
    const auto s = state.s_minus[k];
    sum += ensemble.weights[k] * ensemble.couplings[k] * s;
    double dr = 0.0, di = 0.0, dz = 0.0;
    model.spin(state.alpha.real(), state.alpha.imag(), s.real(), s.imag(), state.s_z[k], ensemble.detunings[k],
               ensemble.couplings[k], dr, di, dz);
    d.s_minus[k] = {dr, di};
    d.s_z[k] = dz;
  }
  const std::complex<double> i(0.0, 1.0);
  d.alpha = -(i * params.delta_c + 0.5 * params.kappa) * state.alpha - i * sum - i * drive;
  return d;
}

std::string_view to_string(Scheme s) { return s == Scheme::Rk4 ? "rk4" : "split_step"; }

Scheme parse_scheme(std::string_view name)
{
  if (name == "rk4") return Scheme::Rk4;
  if (name == "split_step") return Scheme::SplitStep;
  throw std::invalid_argument("unknown integrator scheme '" + std::string(name) + "'");
}

NumericalInstability::NumericalInstability(std::size_t step, double t, const std::string &what)
  : std::runtime_error(what)
  , step_(step)
  , time_(t)
{
}

double resolve_time_step(double max_detuning, double other_rate, const IntegratorSettings &integrator)
{
  if (!(integrator.c_stab > 0.0)) throw std::invalid_argument("c_stab must be positive");
  if (integrator.dt < 0.0 || !std::isfinite(integrator.dt)) throw std::invalid_argument("dt must be non-negative");
  const double fastest = integrator.scheme == Scheme::Rk4 ? std::max(max_detuning, other_rate) : other_rate;

  if (integrator.dt == 0.0) {
    if (fastest == 0.0) throw std::invalid_argument("dt = 0 requested but the system has no finite rate scale");
    return integrator.c_stab / fastest;
  }
  if (integrator.scheme == Scheme::Rk4 && integrator.dt * max_detuning > integrator.c_stab) {
    std::ostringstream msg;
    msg << "dt = " << integrator.dt << " s does not resolve the largest detuning " << max_detuning
        << " rad/s (need dt <= " << integrator.c_stab / max_detuning << " s, or use the split_step scheme)";
    throw std::invalid_argument(msg.str());
  }
  return integrator.dt;
}

double resolve_time_step(const SpinEnsemble &ensemble, const PhysicalParams &params,
                         const IntegratorSettings &integrator)
{
  const double other = std::max({std::abs(params.delta_c), 0.5 * params.kappa,
                                 0.5 * params.gamma + 2.0 * params.dephasing, ensemble.collective_coupling()});
  return resolve_time_step(ensemble.max_abs_detuning(), other, integrator);
}

Trajectory simulate(const SpinEnsemble &ensemble, const PhysicalParams &params, const PulseSequence &seq,
                    const IntegratorSettings &integrator, const RecordSettings &record, SystemState &state)
{
  ensemble.validate();
  params.validate();
  check_record_settings(record, ensemble.size());
  if (state.size() != ensemble.size() || state.s_z.size() != ensemble.size())
    throw std::invalid_argument("simulate: initial state size differs from the ensemble");
  if (!all_finite(state)) throw std::invalid_argument("simulate: initial state is not finite");
  if (!(seq.t_end() > state.t)) throw std::invalid_argument("simulate: t_end must lie after the initial time");

  const double dt = resolve_time_step(ensemble, params, integrator);
  detail::FieldSpinStepper<MeanFieldModel> stepper(make_model(params), ensemble.detunings, ensemble.couplings,
                                                  ensemble.weights, integrator.scheme == Scheme::SplitStep);
  stepper.set_state(state.alpha, state.s_minus, state.s_z);

  Trajectory traj;
  traj.meta = run_meta(ensemble, params, integrator, dt, record);
  traj.meta["pulse_sequence"] = to_json(seq);
  for (auto k : record.bloch_classes) {
    BlochSeries b;
    b.class_index = k;
    b.detuning = ensemble.detunings[k];
    traj.bloch.push_back(std::move(b));
  }

  const double z_bound = 1.0 + 10.0 * integrator.tolerance;
  std::size_t steps = 0;
  double t_now = state.t;

  auto step = [&](double t, double h, std::complex<double> drive) {
    stepper.step(h, drive);
    ++steps;
    t_now = t + h;
  };
  auto store = [&](double t) {
    if (!stepper.healthy(z_bound)) {
      std::ostringstream msg;
      msg << "numerical instability after step " << steps << " (t = " << t
          << " s): non-finite value or |s_z| > 1 + 10 eps; reduce dt";
      throw NumericalInstability(steps, t, msg.str());
    }
    traj.push_back(t, stepper.alpha());
    for (auto &b : traj.bloch) {
      const auto k = b.class_index;
      b.sx.push_back(2.0 * stepper.sr(k));
      b.sy.push_back(-2.0 * stepper.si(k));
      b.sz.push_back(stepper.z(k));
    }
  };
  detail::march(seq, state.t, seq.t_end(), record.stride, dt, step, store);

  stepper.get_state(state.alpha, state.s_minus, state.s_z);
  state.t = t_now;
  traj.meta["steps"] = steps;
  return traj;
}

Trajectory simulate(const SpinEnsemble &ensemble, const PhysicalParams &params, const PulseSequence &seq,
                    const IntegratorSettings &integrator, const RecordSettings &record,
                    const std::optional<SystemState> &initial)
{
  SystemState state = initial ? *initial : SystemState::ground(ensemble.size());
  return simulate(ensemble, params, seq, integrator, record, state);
}

SystemState ideal_initial_state(const SpinEnsemble &ensemble, double tau, double beta)
{
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("ideal initialization: beta must lie in (0, 1]");
  if (!(tau >= 0.0)) throw std::invalid_argument("ideal initialization: tau must be non-negative");
  SystemState s;
  s.s_minus.resize(ensemble.size());
  s.s_z.assign(ensemble.size(), -std::sqrt(1.0 - beta * beta));
  for (std::size_t k = 0; k < ensemble.size(); ++k) s.s_minus[k] = std::polar(0.5 * beta, ensemble.detunings[k] * tau);
  return s;
}

Trajectory simulate_ideal_init(const SpinEnsemble &ensemble, const PhysicalParams &params, const IdealInit &init,
                               const IntegratorSettings &integrator, const RecordSettings &record)
{
  if (!(init.t_end >= 2.0 * init.tau) || !(init.t_end > 0.0))
    throw std::invalid_argument("ideal initialization: t_end must be at least 2 tau");
  SystemState state = ideal_initial_state(ensemble, init.tau, init.beta);
  auto traj = simulate(ensemble, params, PulseSequence({}, init.t_end), integrator, record, state);
  traj.meta["ideal_init"] = {{"tau", init.tau}, {"beta", init.beta}};
  return traj;
}

double max_relative_deviation(const Trajectory &a, const Trajectory &reference)
{
  if (a.size() != reference.size()) throw std::invalid_argument("trajectories have different sample counts");
  double peak = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.times[i] != reference.times[i]) throw std::invalid_argument("trajectories are sampled at different times");
    peak = std::max(peak, reference.photon_number[i]);
    worst = std::max(worst, std::abs(a.photon_number[i] - reference.photon_number[i]));
  }
  return peak > 0.0 ? worst / peak : worst;
}

ConvergenceReport convergence_check(const SpinEnsemble &ensemble, const PhysicalParams &params,
                                    const PulseSequence &seq, const IntegratorSettings &integrator,
                                    const RecordSettings &record)
{
  IntegratorSettings coarse = integrator;
  coarse.dt = resolve_time_step(ensemble, params, integrator);
  IntegratorSettings fine = coarse;
  fine.dt = 0.5 * coarse.dt;
  const auto a = simulate(ensemble, params, seq, coarse, record);
  const auto b = simulate(ensemble, params, seq, fine, record);
  return {coarse.dt, max_relative_deviation(a, b)};
}

nlohmann::json to_json(const IntegratorSettings &s)
{
  return {{"dt", s.dt}, {"scheme", std::string(to_string(s.scheme))}, {"c_stab", s.c_stab}, {"tolerance", s.tolerance}};
}

} // namespace echotrain
