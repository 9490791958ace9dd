#include "emachine/epmm.hpp"

#include <cmath>
#include <numeric>

namespace emachine::epmm {

Ensemble Ensemble::at_state(PmmSpec spec, std::int64_t n, std::size_t s0) {
  Ensemble e;
  e.spec = std::move(spec);
  e.n = n;
  e.occupations.assign(e.spec.n_states, 0);
  if (s0 >= e.spec.n_states) fail(Errc::Config, "initial state out of range");
  e.occupations[s0] = n;
  e.validate();
  return e;
}

void Ensemble::validate() const {
  spec.validate();
  if (n < 1) fail(Errc::Config, "ensemble needs at least one molecule");
  if (occupations.size() != spec.n_states) fail(Errc::Config, "occupation vector length differs from the state count");
  std::int64_t total = 0;
  for (auto k : occupations) {
    if (k < 0) fail(Errc::Config, "negative occupation number");
    total += k;
  }
  if (total != n) fail(Errc::Config, "occupations do not sum to N");
}

std::vector<double> Ensemble::fractions() const {
  std::vector<double> f(occupations.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = double(occupations[i]) / double(n);
  return f;
}

namespace {

void check_step(const PmmSpec& spec, std::span<const double> x, double dt) {
  if (!(dt > 0.0)) fail(Errc::Config, "dt must be positive");
  const double m = spec.max_exit_rate(x);
  if (dt * m > 0.1) fail(Errc::StepSize, "dt * max exit rate = " + std::to_string(dt * m) + " exceeds 0.1");
}

void tau_leap(Ensemble& ens, std::span<const double> a, double dt, Rng& rng) {
  const std::size_t n = ens.spec.n_states;
  std::vector<std::int64_t> delta(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    const std::int64_t nj = ens.occupations[j];
    if (nj == 0) continue;
    double exit = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i != j) exit += a[i * n + j];
    }
    if (exit <= 0.0) continue;
    std::int64_t left = std::binomial_distribution<std::int64_t>(nj, std::min(1.0, exit * dt))(rng);
    delta[j] -= left;
    // Sequential binomials give the multinomial split of the departures.
    double remaining = exit;
    for (std::size_t i = 0; i < n && left > 0; ++i) {
      if (i == j) continue;
      const double r = a[i * n + j];
      if (r <= 0.0) continue;
      const double q = std::min(1.0, r / remaining);
      const std::int64_t k = q >= 1.0 ? left : std::binomial_distribution<std::int64_t>(left, q)(rng);
      delta[i] += k;
      left -= k;
      remaining -= r;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    ens.occupations[i] += delta[i];
    if (ens.occupations[i] < 0) fail(Errc::StepSize, "tau-leap produced a negative occupation");
  }
}

void exact(Ensemble& ens, std::span<const double> a, double dt, Rng& rng) {
  const std::size_t n = ens.spec.n_states;
  std::vector<double> exit(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (i != j) exit[j] += a[i * n + j];
    }
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double t = 0.0;
  while (true) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += double(ens.occupations[j]) * exit[j];
    if (total <= 0.0) return;
    t += std::exponential_distribution<double>(total)(rng);
    if (t >= dt) return;
    double pick = unit(rng) * total;
    std::size_t from = n;
    for (std::size_t j = 0; j < n; ++j) {
      const double w = double(ens.occupations[j]) * exit[j];
      if (w <= 0.0) continue;
      from = j;
      pick -= w;
      if (pick < 0.0) break;
    }
    pick = unit(rng) * exit[from];
    std::size_t to = from;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = i == from ? 0.0 : a[i * n + from];
      if (r <= 0.0) continue;
      to = i;
      pick -= r;
      if (pick < 0.0) break;
    }
    --ens.occupations[from];
    ++ens.occupations[to];
  }
}

}  // namespace

void ensemble_step(Ensemble& ens, std::span<const double> x, double dt, Rng& rng, StepMode mode) {
  check_step(ens.spec, x, dt);
  const auto a = ens.spec.rate_matrix(x);
  if (mode == StepMode::Exact) {
    if (ens.n > 1000) fail(Errc::Config, "exact ensemble stepping is limited to N <= 1000");
    exact(ens, a, dt, rng);
  } else {
    tau_leap(ens, a, dt, rng);
  }
}

std::vector<double> meanfield_step(const std::vector<double>& e_bar, std::span<const double> x, const PmmSpec& spec,
                                   double dt) {
  return pmm::master_step(e_bar, x, spec, dt);
}

double ensemble_output(const Ensemble& ens, std::span<const double> x) {
  double y = 0.0;
  for (std::size_t i = 0; i < ens.occupations.size(); ++i) {
    if (ens.occupations[i] != 0) y += double(ens.occupations[i]) * ens.spec.omega(x, i);
  }
  return y;
}

double meanfield_output(std::span<const double> e_bar, std::int64_t n, std::span<const double> x,
                        const PmmSpec& spec) {
  double y = 0.0;
  for (std::size_t i = 0; i < e_bar.size(); ++i) y += spec.omega(x, i) * e_bar[i];
  return double(n) * y;
}

OccupancyStats occupancy_stats(double p, std::int64_t n) {
  if (!(p >= 0.0 && p <= 1.0)) fail(Errc::Config, "occupancy probability must lie in [0, 1]");
  if (n < 1) fail(Errc::Config, "ensemble size must be positive");
  const double var = p * (1.0 - p);
  return {double(n) * p, std::sqrt(double(n) * var), std::sqrt(var / double(n))};
}

void MembraneModel::validate() const {
  if (!(c_m > 0.0)) fail(Errc::Config, "membrane capacitance must be positive");
  if (!(g_leak >= 0.0)) fail(Errc::Config, "leak conductance must be non-negative");
  if (!(max_dv > 0.0)) fail(Errc::Config, "max_dv must be positive");
  for (const auto& p : stimulus) {
    if (!(p.t_off >= p.t_on)) fail(Errc::Config, "stimulus pulse ends before it starts");
  }
}

double MembraneModel::stimulus_at(double t) const {
  double i = 0.0;
  for (const auto& p : stimulus) {
    if (t >= p.t_on && t < p.t_off) i += p.amplitude;
  }
  return i;
}

void CoupledSystem::validate() const {
  membrane.validate();
  for (const auto& e : ensembles) e.validate();
  std::vector<bool> targeted(ensembles.size(), false);
  for (const auto& l : links) {
    if (l.source >= ensembles.size() || l.target >= ensembles.size()) fail(Errc::Config, "link refers to a missing ensemble");
    if (!(l.tau > 0.0)) fail(Errc::Config, "messenger time constant must be positive");
    if (targeted[l.target]) fail(Errc::Config, "an ensemble can receive at most one messenger link");
    targeted[l.target] = true;
  }
  if (meanfield && e_bar.size() != ensembles.size()) fail(Errc::Config, "mean-field state missing for some ensembles");
}

Input CoupledSystem::input_of(std::size_t k) const {
  return {v, k < messenger.size() ? messenger[k] : 0.0};
}

std::vector<double> CoupledSystem::fractions(std::size_t k) const {
  return meanfield ? e_bar.at(k) : ensembles.at(k).fractions();
}

CoupledStepResult coupled_step(CoupledSystem& sys, double dt, std::span<Rng> rngs) {
  const std::size_t m = sys.ensembles.size();
  if (!sys.meanfield && rngs.size() < m) fail(Errc::Config, "one random stream per ensemble is required");
  sys.messenger.resize(m, 0.0);
  CoupledStepResult r;
  r.currents.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    const Input x = sys.input_of(k);
    if (sys.meanfield) {
      sys.e_bar[k] = meanfield_step(sys.e_bar[k], x, sys.ensembles[k].spec, dt);
      r.currents[k] = meanfield_output(sys.e_bar[k], sys.ensembles[k].n, x, sys.ensembles[k].spec);
    } else {
      ensemble_step(sys.ensembles[k], x, dt, rngs[k], sys.mode);
      r.currents[k] = ensemble_output(sys.ensembles[k], x);
    }
  }
  r.stimulus = sys.membrane.stimulus_at(sys.t);
  const auto& mb = sys.membrane;
  const double ionic = std::accumulate(r.currents.begin(), r.currents.end(), 0.0);
  const double dv = dt * (-ionic - mb.g_leak * (sys.v - mb.e_leak) + r.stimulus) / mb.c_m;
  if (!std::isfinite(dv)) fail(Errc::NumericalDivergence, "membrane potential diverged");
  if (std::abs(dv) > mb.max_dv) {
    fail(Errc::StepSize, "membrane step of " + std::to_string(dv) + " V exceeds max_dv; reduce dt");
  }
  for (const auto& l : sys.links) {
    sys.messenger[l.target] += dt * (l.gain * r.currents[l.source] - sys.messenger[l.target]) / l.tau;
  }
  sys.v += dv;
  sys.t += dt;
  return r;
}

}  // namespace emachine::epmm
