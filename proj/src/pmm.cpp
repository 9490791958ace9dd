#include "emachine/pmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace emachine::pmm {

double RateEntry::eval(std::span<const double> x) const {
  if (kind == Kind::Const) return amplitude;
  if (input >= x.size()) fail(Errc::Config, "rate depends on input component " + std::to_string(input));
  return amplitude / (1.0 + std::exp(-(x[input] - midpoint) / slope));
}

void ChannelParams::validate(std::size_t n_states) const {
  if (permeability.size() != n_states) fail(Errc::Config, "GHK permeabilities must list every state");
  for (double p : permeability) {
    if (!(p >= 0.0) || !std::isfinite(p)) fail(Errc::Config, "permeabilities must be finite and non-negative");
  }
  if (z == 0) fail(Errc::Config, "ion valence must be non-zero");
  if (!(temperature > 0.0)) fail(Errc::Config, "temperature must be positive");
  if (!(c_in > 0.0) || !(c_out > 0.0)) fail(Errc::Config, "ion concentrations must be positive");
}

double ChannelParams::nernst() const {
  return kGasConstant * temperature / (z * kFaraday) * std::log(c_out / c_in);
}

double ghk_current(double v, std::size_t j, const ChannelParams& params) {
  const double u = params.z * v * kFaraday / (kGasConstant * params.temperature);
  // u / (1 - e^{-u}), with its removable singularity at u = 0.
  const double shape = std::abs(u) < 1e-6 ? 1.0 + u / 2.0 + u * u / 12.0 : u / -std::expm1(-u);
  return params.permeability.at(j) * params.z * kFaraday * (params.c_in - params.c_out * std::exp(-u)) * shape;
}

void PmmSpec::validate() const {
  if (n_states == 0) fail(Errc::Config, "PMM needs at least one state");
  for (const auto& r : rates) {
    if (r.from >= n_states || r.to >= n_states) fail(Errc::Config, "rate entry refers to a missing state");
    if (r.from == r.to) fail(Errc::Config, "rate entry from a state to itself");
    if (!(r.amplitude >= 0.0) || !std::isfinite(r.amplitude)) fail(Errc::Config, "rate amplitudes must be non-negative");
    if (r.kind == RateEntry::Kind::Sigmoid && !(r.slope != 0.0 && std::isfinite(r.slope))) {
      fail(Errc::Config, "sigmoid slope must be finite and non-zero");
    }
  }
  if (ghk) {
    ghk->validate(n_states);
  } else if (!omega_table.empty() && omega_table.size() != n_states) {
    fail(Errc::Config, "omega table must list every state");
  }
}

std::vector<double> PmmSpec::rate_matrix(std::span<const double> x) const {
  std::vector<double> a(n_states * n_states, 0.0);
  for (const auto& r : rates) a[r.to * n_states + r.from] += r.eval(x);
  return a;
}

double PmmSpec::exit_rate(std::span<const double> x, std::size_t from) const {
  double total = 0.0;
  for (const auto& r : rates) {
    if (r.from == from) total += r.eval(x);
  }
  return total;
}

double PmmSpec::max_exit_rate(std::span<const double> x) const {
  double m = 0.0;
  for (std::size_t j = 0; j < n_states; ++j) m = std::max(m, exit_rate(x, j));
  return m;
}

double PmmSpec::omega(std::span<const double> x, std::size_t state) const {
  if (ghk) {
    if (voltage_input >= x.size()) fail(Errc::Config, "GHK output needs the voltage input component");
    return ghk_current(x[voltage_input], state, *ghk);
  }
  return omega_table.empty() ? 0.0 : omega_table.at(state);
}

namespace {

void derivative(std::span<const double> a, std::size_t n, std::span<const double> p, std::span<double> dp) {
  std::fill(dp.begin(), dp.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double flow = a[i * n + j] * p[j];
      dp[i] += flow;
      dp[j] -= flow;
    }
  }
}

}  // namespace

ProbabilityVector master_step(const ProbabilityVector& p, std::span<const double> rates, double dt) {
  const std::size_t n = p.size();
  if (rates.size() != n * n) fail(Errc::Config, "rate matrix does not match the probability vector");
  if (!(dt > 0.0)) fail(Errc::Config, "dt must be positive");
  double max_exit = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double out = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i != j) out += rates[i * n + j];
    }
    max_exit = std::max(max_exit, out);
  }
  if (dt * max_exit > 0.1) {
    fail(Errc::StepSize, "dt * max exit rate = " + std::to_string(dt * max_exit) + " exceeds 0.1");
  }
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  derivative(rates, n, p, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = p[i] + 0.5 * dt * k1[i];
  derivative(rates, n, tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = p[i] + 0.5 * dt * k2[i];
  derivative(rates, n, tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = p[i] + dt * k3[i];
  derivative(rates, n, tmp, k4);
  ProbabilityVector out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = p[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (out[i] < -1e-12) fail(Errc::StepSize, "master step produced a negative probability");
    if (!std::isfinite(out[i])) fail(Errc::NumericalDivergence, "master step produced a non-finite probability");
  }
  return out;
}

ProbabilityVector master_step(const ProbabilityVector& p, std::span<const double> x, const PmmSpec& spec, double dt) {
  if (p.size() != spec.n_states) fail(Errc::Config, "probability vector length differs from the state count");
  return master_step(p, spec.rate_matrix(x), dt);
}

double conservation_residual(std::span<const double> p) {
  return std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0);
}

std::vector<Transition> sample_path(const PmmSpec& spec, const InputSignal& signal, std::size_t s0, double t_end,
                                    std::uint64_t seed) {
  if (s0 >= spec.n_states) fail(Errc::Config, "initial state out of range");
  if (signal.empty() || signal.front().t > 0.0) fail(Errc::Config, "input signal must start at t = 0");
  for (std::size_t k = 1; k < signal.size(); ++k) {
    if (!(signal[k].t > signal[k - 1].t)) fail(Errc::Config, "input switch times must increase");
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Transition> path{{0.0, s0}};
  std::size_t s = s0;
  double t = 0.0;
  for (std::size_t seg = 0; seg < signal.size() && t < t_end; ++seg) {
    const double seg_end = seg + 1 < signal.size() ? std::min(signal[seg + 1].t, t_end) : t_end;
    const auto a = spec.rate_matrix(signal[seg].x);
    while (true) {
      double total = 0.0;
      for (std::size_t i = 0; i < spec.n_states; ++i) {
        if (i != s) total += a[i * spec.n_states + s];
      }
      if (total <= 0.0) break;  // absorbing until the input changes
      const double dwell = std::exponential_distribution<double>(total)(rng);
      if (t + dwell >= seg_end) break;
      t += dwell;
      double pick = unit(rng) * total;
      std::size_t next = s;
      for (std::size_t i = 0; i < spec.n_states; ++i) {
        const double rate = i == s ? 0.0 : a[i * spec.n_states + s];
        if (rate <= 0.0) continue;
        next = i;
        pick -= rate;
        if (pick < 0.0) break;
      }
      s = next;
      path.push_back({t, s});
    }
    t = seg_end;
  }
  return path;
}

std::size_t state_at(std::span<const Transition> path, double t) {
  if (path.empty()) fail(Errc::Config, "empty path");
  auto it = std::upper_bound(path.begin(), path.end(), t, [](double v, const Transition& tr) { return v < tr.t; });
  return it == path.begin() ? path.front().state : std::prev(it)->state;
}

PmmSpec channel5_spec(const Channel5Params& params) {
  for (const auto* s : {&params.a10, &params.a21, &params.a32}) {
    if (!(s->amplitude > 0.0)) fail(Errc::Config, "sigmoid amplitudes must be positive");
    if (!(s->slope > 0.0)) fail(Errc::Config, "sigmoid slopes must be positive");
  }
  if (!(params.a43 > 0.0) || !(params.a04 > 0.0)) fail(Errc::Config, "constant rates must be positive");
  if (!(params.p_open >= 0.0)) fail(Errc::Config, "open permeability must be non-negative");
  auto sig = [](std::size_t from, std::size_t to, const SigmoidRate& s) {
    return RateEntry{from, to, RateEntry::Kind::Sigmoid, s.amplitude, s.midpoint, s.slope, 0};
  };
  auto cst = [](std::size_t from, std::size_t to, double a) {
    return RateEntry{from, to, RateEntry::Kind::Const, a, 0.0, 1.0, 0};
  };
  PmmSpec spec;
  spec.n_states = 5;
  spec.rates = {sig(0, 1, params.a10), sig(1, 2, params.a21), sig(2, 3, params.a32), cst(3, 4, params.a43),
                cst(4, 0, params.a04)};
  ChannelParams ion = params.ion;
  ion.permeability.assign(5, 0.0);
  ion.permeability[3] = params.p_open;
  if (params.kind == ChannelKind::Potassium) ion.permeability[4] = params.p_open;
  spec.ghk = ion;
  spec.voltage_input = 0;
  spec.validate();
  return spec;
}

nlohmann::json to_json(const PmmSpec& spec) {
  nlohmann::json rates = nlohmann::json::array();
  for (const auto& r : spec.rates) {
    nlohmann::json e{{"from", r.from}, {"to", r.to}};
    if (r.kind == RateEntry::Kind::Const) {
      e["kind"] = "const";
      e["params"] = {{"value", r.amplitude}};
    } else {
      e["kind"] = "sigmoid";
      e["params"] = {{"amplitude", r.amplitude}, {"midpoint", r.midpoint}, {"slope", r.slope}, {"input", r.input}};
    }
    rates.push_back(e);
  }
  nlohmann::json j{{"states", spec.n_states}, {"rates", rates}};
  if (spec.ghk) {
    const auto& g = *spec.ghk;
    j["omega"] = {{"ghk",
                   {{"permeability", g.permeability},
                    {"z", g.z},
                    {"temperature", g.temperature},
                    {"c_in", g.c_in},
                    {"c_out", g.c_out},
                    {"input", spec.voltage_input}}}};
  } else {
    j["omega"] = {{"table", spec.omega_table}};
  }
  return j;
}

PmmSpec spec_from_json(const nlohmann::json& j) {
  PmmSpec spec;
  try {
    spec.n_states = j.at("states").get<std::size_t>();
    for (const auto& e : j.at("rates")) {
      RateEntry r;
      r.from = e.at("from").get<std::size_t>();
      r.to = e.at("to").get<std::size_t>();
      const auto kind = e.at("kind").get<std::string>();
      const auto& p = e.at("params");
      if (kind == "const") {
        r.kind = RateEntry::Kind::Const;
        r.amplitude = p.at("value").get<double>();
      } else if (kind == "sigmoid") {
        r.kind = RateEntry::Kind::Sigmoid;
        r.amplitude = p.at("amplitude").get<double>();
        r.midpoint = p.at("midpoint").get<double>();
        r.slope = p.at("slope").get<double>();
        r.input = p.value("input", std::size_t{0});
      } else {
        fail(Errc::Config, "rate kind must be \"const\" or \"sigmoid\", got \"" + kind + "\"");
      }
      spec.rates.push_back(r);
    }
    if (j.contains("omega")) {
      const auto& o = j.at("omega");
      if (o.contains("ghk")) {
        const auto& g = o.at("ghk");
        ChannelParams c;
        c.permeability = g.at("permeability").get<std::vector<double>>();
        c.z = g.value("z", 1);
        c.temperature = g.value("temperature", 300.0);
        c.c_in = g.at("c_in").get<double>();
        c.c_out = g.at("c_out").get<double>();
        spec.voltage_input = g.value("input", std::size_t{0});
        spec.ghk = c;
      } else {
        spec.omega_table = o.at("table").get<std::vector<double>>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Config, std::string("PMM spec JSON: ") + e.what());
  }
  spec.validate();
  return spec;
}

InputSignal signal_from_json(const nlohmann::json& j) {
  InputSignal s;
  try {
    for (const auto& seg : j) s.push_back({seg.at("t").get<double>(), seg.at("x").get<Input>()});
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Config, std::string("input signal JSON: ") + e.what());
  }
  return s;
}

namespace {

SigmoidRate sigmoid_from_json(const nlohmann::json& j) {
  return {j.at("amplitude").get<double>(), j.at("midpoint").get<double>(), j.at("slope").get<double>()};
}

nlohmann::json to_json(const SigmoidRate& s) {
  return {{"amplitude", s.amplitude}, {"midpoint", s.midpoint}, {"slope", s.slope}};
}

}  // namespace

Channel5Params channel5_from_json(const nlohmann::json& j) {
  Channel5Params c;
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "sodium") {
      c.kind = ChannelKind::Sodium;
    } else if (kind == "potassium") {
      c.kind = ChannelKind::Potassium;
    } else {
      fail(Errc::Config, "channel kind must be \"sodium\" or \"potassium\", got \"" + kind + "\"");
    }
    c.a10 = sigmoid_from_json(j.at("a10"));
    c.a21 = sigmoid_from_json(j.at("a21"));
    c.a32 = sigmoid_from_json(j.at("a32"));
    c.a43 = j.at("a43").get<double>();
    c.a04 = j.at("a04").get<double>();
    c.p_open = j.at("p_open").get<double>();
    const auto& ion = j.at("ion");
    c.ion.z = ion.value("z", 1);
    c.ion.temperature = ion.value("temperature", 300.0);
    c.ion.c_in = ion.at("c_in").get<double>();
    c.ion.c_out = ion.at("c_out").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Config, std::string("channel JSON: ") + e.what());
  }
  return c;
}

nlohmann::json to_json(const Channel5Params& c) {
  return {{"kind", c.kind == ChannelKind::Sodium ? "sodium" : "potassium"},
          {"a10", to_json(c.a10)},
          {"a21", to_json(c.a21)},
          {"a32", to_json(c.a32)},
          {"a43", c.a43},
          {"a04", c.a04},
          {"p_open", c.p_open},
          {"ion", {{"z", c.ion.z}, {"temperature", c.ion.temperature}, {"c_in", c.ion.c_in}, {"c_out", c.ion.c_out}}}};
}

}  // namespace emachine::pmm
