#include "emachine/ann0.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace emachine::ann0 {

namespace {

void derivative(std::span<const double> u, std::span<const double> s, double x_inh, const Ann0Params& p,
                std::vector<double>& out) {
  const double q = inhibition(u, x_inh, p);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double r = u[i] > 0.0 ? u[i] : 0.0;
    out[i] = (-u[i] + s[i] + p.alpha * r - q) / p.tau;
  }
}

/// One RK4 step without noise; returns the largest deterministic increment.
double rk4_step(std::vector<double>& u, std::span<const double> s, double x_inh, const Ann0Params& p, double dt,
                std::vector<double> (&work)[5]) {
  auto& [k1, k2, k3, k4, tmp] = work;
  const std::size_t n = u.size();
  derivative(u, s, x_inh, p, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * dt * k1[i];
  derivative(tmp, s, x_inh, p, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * dt * k2[i];
  derivative(tmp, s, x_inh, p, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + dt * k3[i];
  derivative(tmp, s, x_inh, p, k4);
  double largest = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double du = dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    u[i] += du;
    largest = std::max(largest, std::abs(du));
  }
  return largest;
}

void add_noise(std::vector<double>& u, double amp, Rng& rng) {
  if (amp <= 0.0) return;
  std::uniform_real_distribution<double> noise(-amp, amp);
  for (auto& v : u) v += noise(rng);
}

void check_finite(const std::vector<double>& u, double t) {
  for (double v : u) {
    if (!std::isfinite(v)) fail(Errc::NumericalDivergence, "ann0: non-finite potential at t=" + std::to_string(t));
  }
}

std::vector<double> to_real(const codes::SymbolVector& v) {
  std::vector<double> out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = v[j];
  return out;
}

std::size_t active_count(std::span<const double> u) {
  return static_cast<std::size_t>(std::count_if(u.begin(), u.end(), [](double v) { return v > 0.0; }));
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Ann0Params::validate() const {
  if (!(tau > 0.0)) fail(Errc::Config, "ann0: tau must be positive");
  if (n() == 0) fail(Errc::Config, "ann0: need at least one intermediate neuron");
  if (gy.rows > 0 && gy.cols != n()) fail(Errc::Config, "ann0: gy must have n columns");
  if (noise_amp < 0.0) fail(Errc::Config, "ann0: noise_amp must be non-negative");
  for (double v : gx.data) {
    if (!std::isfinite(v)) fail(Errc::Config, "ann0: gx must be finite");
  }
  for (double v : gy.data) {
    if (!std::isfinite(v)) fail(Errc::Config, "ann0: gy must be finite");
  }
}

std::vector<double> synaptic_currents(std::span<const double> x, const Ann0Params& p) {
  if (x.size() != p.m()) fail(Errc::Config, "ann0: input dimension mismatch");
  std::vector<double> s(p.n(), 0.0);
  for (std::size_t i = 0; i < p.n(); ++i) {
    for (std::size_t j = 0; j < p.m(); ++j) s[i] += p.gx(i, j) * x[j];
  }
  return s;
}

std::vector<double> output_projection(std::span<const double> r, const Ann0Params& p) {
  if (r.size() != p.n()) fail(Errc::Config, "ann0: activity dimension mismatch");
  std::vector<double> y(p.k(), 0.0);
  for (std::size_t k = 0; k < p.k(); ++k) {
    for (std::size_t i = 0; i < p.n(); ++i) y[k] += p.gy(k, i) * r[i];
  }
  return y;
}

std::vector<double> rectify(std::span<const double> u) {
  std::vector<double> r(u.size());
  std::transform(u.begin(), u.end(), r.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
  return r;
}

double inhibition(std::span<const double> u, double x_inh, const Ann0Params& p) {
  double sum = 0.0;
  for (double v : u) {
    if (v > 0.0) sum += v;
  }
  return p.beta * sum + x_inh;
}

void integrate(Ann0State& state, std::span<const double> s, double x_inh, const Ann0Params& p, double dt,
               std::size_t steps, Rng& rng, const Observer& observe) {
  if (s.size() != state.u.size() || s.size() != p.n()) fail(Errc::Config, "ann0: current dimension mismatch");
  if (!(dt > 0.0) || dt > p.tau / 50.0 * (1.0 + 1e-12)) {
    fail(Errc::Config, "ann0: dt must be in (0, tau/50] for accuracy");
  }
  std::vector<double> work[5];
  for (auto& w : work) w.resize(state.u.size());
  for (std::size_t step = 0; step < steps; ++step) {
    rk4_step(state.u, s, x_inh, p, dt, work);
    add_noise(state.u, p.noise_amp, rng);
    state.t += dt;
    check_finite(state.u, state.t);
    if (observe) observe(state, x_inh);
  }
}

std::vector<double> closed_form_u(const Ann0Params& p, std::span<const double> s, std::span<const double> u0,
                                  double x_inh, std::span<const std::size_t> active, double t) {
  if (active.empty()) fail(Errc::Config, "closed_form_u: active set is empty");
  if (s.size() != u0.size()) fail(Errc::Config, "closed_form_u: s and u0 differ in length");
  if (p.alpha == 1.0) fail(Errc::SingularParameter, "closed_form_u: alpha = 1 makes (alpha - 1) vanish");
  const double n1 = double(active.size());
  const double denom = 1.0 + p.beta * n1 - p.alpha;
  if (denom == 0.0) fail(Errc::SingularParameter, "closed_form_u: 1 + beta n1 - alpha = 0");
  double s_av = 0.0;
  double u0_av = 0.0;
  for (auto i : active) {
    if (i >= s.size()) fail(Errc::Config, "closed_form_u: active index out of range");
    s_av += s[i];
    u0_av += u0[i];
  }
  s_av /= n1;
  u0_av /= n1;
  const double a = (p.alpha - 1.0) / p.tau;
  const double b = denom / p.tau;
  const double grow = std::exp(a * t);
  const double decay = std::exp(-b * t);
  std::vector<double> u;
  u.reserve(active.size());
  for (auto i : active) {
    u.push_back((s[i] - s_av) / (p.alpha - 1.0) * (grow - 1.0) + (u0[i] - u0_av) * grow +
                (s_av - x_inh) / denom * (1.0 - decay) + u0_av * decay);
  }
  return u;
}

WtaResult run_wta(const Ann0Params& p, std::span<const double> s, double x_inh, std::uint64_t seed, double dt) {
  p.validate();
  if (!p.wta_regime()) fail(Errc::Config, "run_wta: parameters outside 1 < alpha < 1 + beta");
  if (s.size() != p.n()) fail(Errc::Config, "run_wta: current dimension mismatch");
  if (dt <= 0.0) dt = p.tau / 100.0;
  Rng rng(seed);
  std::vector<double> u(p.n(), 0.0);
  std::vector<double> work[5];
  for (auto& w : work) w.resize(u.size());

  const auto max_steps = static_cast<std::size_t>(std::ceil(1000.0 * p.tau / dt));
  const auto hold_steps = static_cast<std::size_t>(std::ceil(p.tau / dt));
  // Increments below this are indistinguishable from the injected noise.
  const double quiet = 1e-9 * p.tau + p.noise_amp;
  std::optional<std::size_t> leader;
  std::size_t held = 0;
  for (std::size_t step = 1; step <= max_steps; ++step) {
    const double du = rk4_step(u, s, x_inh, p, dt, work);
    add_noise(u, p.noise_amp, rng);
    check_finite(u, double(step) * dt);
    std::optional<std::size_t> single;
    if (active_count(u) == 1) {
      single = static_cast<std::size_t>(std::find_if(u.begin(), u.end(), [](double v) { return v > 0.0; }) - u.begin());
    }
    if (single && single == leader) {
      ++held;
    } else {
      leader = single;
      held = 0;
    }
    if (leader && held >= hold_steps && du < quiet) return {*leader, double(step) * dt};
  }
  fail(Errc::NonConvergence, "run_wta: no single winner settled within 1000 tau");
}

Ann0Params params_from_program(std::span<const codes::SymbolVector> inputs,
                               std::span<const codes::SymbolVector> outputs, double alpha, double beta,
                               double tau, double noise_amp) {
  if (inputs.size() != outputs.size() || inputs.empty()) {
    fail(Errc::Config, "ann0: program needs equally many, and at least one, input and output rows");
  }
  Ann0Params p;
  p.alpha = alpha;
  p.beta = beta;
  p.tau = tau;
  p.noise_amp = noise_amp;
  const std::size_t n = inputs.size();
  const std::size_t m = inputs.front().size();
  const std::size_t k = outputs.front().size();
  p.gx = Matrix(n, m);
  p.gy = Matrix(k, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (inputs[i].size() != m || outputs[i].size() != k) fail(Errc::Config, "ann0: ragged program rows");
    for (std::size_t j = 0; j < m; ++j) p.gx(i, j) = inputs[i][j];
    for (std::size_t c = 0; c < k; ++c) p.gy(c, i) = outputs[i][c];
  }
  return p;
}

std::optional<codes::SymbolVector> decode_output(std::span<const double> y,
                                                 std::span<const codes::SymbolVector> candidates, double floor) {
  const double norm = std::sqrt(std::inner_product(y.begin(), y.end(), y.begin(), 0.0));
  if (norm < floor) return std::nullopt;
  for (const auto& c : candidates) {
    if (c.size() != y.size()) fail(Errc::Config, "decode_output: candidate dimension mismatch");
    double dot = 0.0;
    double cc = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      dot += y[k] * c[k];
      cc += double(c[k]) * double(c[k]);
    }
    if (cc > 0.0 && dot / (norm * std::sqrt(cc)) > 1.0 - 1e-6) return c;
  }
  fail(Errc::NonConvergence, "decode_output: sampled output matches no stored output code");
}

DriveResult drive_as_symbol_machine(const Ann0Params& p, const DriveSchedule& schedule,
                                    std::span<const codes::SymbolVector> inputs, std::uint64_t seed,
                                    const Observer& observe) {
  p.validate();
  if (schedule.dt_psy < 10.0 * p.tau) fail(Errc::Config, "drive: dt_psy must be at least 10 tau");
  DriveResult result;
  if (schedule.dt_psy < 20.0 * p.tau) result.warnings.push_back("dt_psy below 20 tau; transients may not settle");
  const double dt = schedule.dt > 0.0 ? schedule.dt : p.tau / 100.0;
  const auto half_steps = static_cast<std::size_t>(std::llround(schedule.dt_psy / 2.0 / dt));

  std::vector<std::vector<double>> currents;
  double max_s = 0.0;
  for (const auto& x : inputs) {
    currents.push_back(synaptic_currents(to_real(x), p));
    for (double v : currents.back()) max_s = std::max(max_s, v);
  }
  const double reset_inh = schedule.reset_inh.value_or(10.0 * std::max(max_s, 1.0));

  std::vector<codes::SymbolVector> candidates;
  std::set<codes::SymbolVector> seen;
  for (std::size_t i = 0; i < p.n(); ++i) {
    std::vector<int> column(p.k());
    for (std::size_t k = 0; k < p.k(); ++k) column[k] = static_cast<int>(std::lround(p.gy(k, i)));
    codes::SymbolVector v(std::move(column));
    if (!v.is_null() && seen.insert(v).second) candidates.push_back(v);
  }

  Rng rng(seed);
  Ann0State state{std::vector<double>(p.n(), 0.0), 0.0};
  const std::vector<double> silence(p.n(), 0.0);
  for (std::size_t nu = 0; nu < inputs.size(); ++nu) {
    integrate(state, currents[nu], schedule.threshold_inh, p, dt, half_steps, rng, observe);
    if (active_count(state.u) > 1) {
      fail(Errc::NonConvergence, "drive: competition unresolved at the sampling time of cycle " + std::to_string(nu) +
                                     "; increase dt_psy");
    }
    auto y = output_projection(rectify(state.u), p);
    // Residual noise on a silent network is not an output.
    result.outputs.push_back(decode_output(y, candidates, 1e-9 + 1e3 * p.noise_amp));
    result.raw_outputs.push_back(std::move(y));

    integrate(state, silence, reset_inh, p, dt, half_steps, rng, observe);
    const auto r = rectify(state.u);
    if (*std::max_element(r.begin(), r.end()) > schedule.reset_tolerance) {
      fail(Errc::ResetFailure, "drive: activity survived the quiet half-cycle " + std::to_string(nu) +
                                   "; raise reset_inh");
    }
  }
  return result;
}

}  // namespace emachine::ann0
