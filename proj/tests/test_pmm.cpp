#include <gtest/gtest.h>

#include <cmath>

#include "emachine/pmm.hpp"

using namespace emachine;
using namespace emachine::pmm;

namespace {

PmmSpec two_state(double a10, double a01) {
  PmmSpec s;
  s.n_states = 2;
  s.rates = {{0, 1, RateEntry::Kind::Const, a10}, {1, 0, RateEntry::Kind::Const, a01}};
  s.omega_table = {0.0, 1.0};
  return s;
}

ChannelParams potassium_like(double p = 1e-6) {
  ChannelParams c;
  c.permeability = {p};
  c.z = 1;
  c.temperature = 300.0;
  c.c_in = 0.14;
  c.c_out = 0.005;
  return c;
}

Channel5Params channel(ChannelKind kind) {
  Channel5Params c;
  c.kind = kind;
  c.a10 = {20.0, -0.030, 0.003};
  c.a21 = {20.0, -0.080, 0.004};
  c.a32 = {20.0, -0.080, 0.004};
  c.ion = potassium_like();
  return c;
}

std::vector<double> integrate(const PmmSpec& spec, std::vector<double> p, const Input& x, double dt, long steps) {
  for (long k = 0; k < steps; ++k) p = master_step(p, x, spec, dt);
  return p;
}

double band(double p, int n) { return 3.0 * std::sqrt(p * (1.0 - p) / n) + 1e-12; }

}  // namespace

TEST(Master, ZeroRatesLeavePUnchanged) {
  const auto spec = two_state(0.0, 0.0);
  const std::vector<double> p{0.3, 0.7};
  EXPECT_EQ(master_step(p, Input{0.0}, spec, 0.1), p);
}

TEST(Master, TwoStateEquilibrium) {
  const auto p = integrate(two_state(2.0, 3.0), {1.0, 0.0}, Input{0.0}, 0.01, 2000);
  EXPECT_NEAR(p[1], 0.4, 1e-9);
}

TEST(Master, SymmetricTransientMatchesAnalyticSolution) {
  const auto spec = two_state(1.0, 1.0);
  std::vector<double> p{1.0, 0.0};
  double t = 0.0;
  for (double probe : {0.5, 1.0, 2.0}) {
    const long steps = std::lround((probe - t) / 1e-3);
    p = integrate(spec, p, Input{0.0}, 1e-3, steps);
    t = probe;
    EXPECT_NEAR(p[0], 0.5 * (1.0 + std::exp(-2.0 * t)), 1e-9) << "t = " << t;
  }
}

TEST(MasterProperty, ConservationOverManySteps) {
  const auto spec = two_state(2.0, 3.0);
  std::vector<double> p{1.0, 0.0};
  for (int k = 0; k < 100000; ++k) {
    const auto next = master_step(p, Input{0.0}, spec, 0.01);
    EXPECT_LT(std::abs(conservation_residual(next) - conservation_residual(p)), 1e-12);
    p = next;
  }
  EXPECT_LT(conservation_residual(p), 1e-9);
}

TEST(Master, StepSizeGuard) {
  try {
    master_step({1.0, 0.0}, Input{0.0}, two_state(20.0, 1.0), 0.01);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::StepSize);
  }
}

TEST(Conservation, Residual) {
  EXPECT_EQ(conservation_residual(std::vector<double>{0.25, 0.75}), 0.0);
  EXPECT_NEAR(conservation_residual(std::vector<double>{0.25, 0.80}), 0.05, 1e-15);
}

TEST(Path, AbsorbingStateStays) {
  const auto path = sample_path(two_state(0.0, 0.0), {{0.0, {0.0}}}, 1, 100.0, 3);
  ASSERT_EQ(path.size(), 1u);
  EXPECT_EQ(path[0].state, 1u);
  EXPECT_EQ(state_at(path, 50.0), 1u);
}

TEST(Path, SymmetricOccupancyAtEquilibrium) {
  const auto spec = two_state(1.0, 1.0);
  const int n = 10000;
  int in_one = 0;
  for (int k = 0; k < n; ++k) {
    const auto path = sample_path(spec, {{0.0, {0.0}}}, 0, 5.0, derive_seed(4, k));
    in_one += state_at(path, 5.0) == 1;
  }
  const double exact = 0.5 * (1.0 - std::exp(-10.0));
  EXPECT_LE(std::abs(double(in_one) / n - exact), band(exact, n));
}

TEST(Path, DwellTimesAreExponential) {
  const auto spec = two_state(2.5, 1e-9);
  const int n = 10000;
  double sum = 0.0, sum2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const auto path = sample_path(spec, {{0.0, {0.0}}}, 0, 1e3, derive_seed(5, k));
    ASSERT_GE(path.size(), 2u);
    sum += path[1].t;
    sum2 += path[1].t * path[1].t;
  }
  const double mean = sum / n, sd = std::sqrt(sum2 / n - mean * mean);
  EXPECT_NEAR(mean, 1.0 / 2.5, 3.0 * sd / std::sqrt(n));
  EXPECT_NEAR(sd, 1.0 / 2.5, 0.02);
}

TEST(PathProperty, OccupancyMatchesMasterEquationAcrossInputSwitch) {
  // Three-state ring whose first rate follows the input through a sigmoid.
  PmmSpec spec;
  spec.n_states = 3;
  spec.rates = {{0, 1, RateEntry::Kind::Sigmoid, 3.0, 0.0, 0.1, 0},
                {1, 2, RateEntry::Kind::Const, 1.5},
                {2, 0, RateEntry::Kind::Const, 0.7}};
  const InputSignal signal{{0.0, {-1.0}}, {0.4, {1.0}}, {1.5, {0.0}}};
  const std::vector<double> probes{0.3, 0.8, 1.2, 2.0, 3.0};
  // Master equation, piecewise in the input.
  std::vector<std::vector<double>> expect;
  std::vector<double> p{1.0, 0.0, 0.0};
  const double dt = 1e-4;
  double t = 0.0;
  for (double probe : probes) {
    while (t < probe - dt / 2) {
      std::size_t seg = 0;
      while (seg + 1 < signal.size() && signal[seg + 1].t <= t + dt / 2) ++seg;
      p = master_step(p, signal[seg].x, spec, dt);
      t += dt;
    }
    expect.push_back(p);
  }
  const int n = 10000;
  std::vector<std::vector<int>> counts(probes.size(), std::vector<int>(3, 0));
  for (int k = 0; k < n; ++k) {
    const auto path = sample_path(spec, signal, 0, 3.0, derive_seed(6, k));
    for (std::size_t i = 0; i < probes.size(); ++i) ++counts[i][state_at(path, probes[i])];
  }
  for (std::size_t i = 0; i < probes.size(); ++i) {
    for (std::size_t s = 0; s < 3; ++s) {
      EXPECT_LE(std::abs(double(counts[i][s]) / n - expect[i][s]), band(expect[i][s], n))
          << "t = " << probes[i] << " state " << s;
    }
  }
}

TEST(Ghk, RegressionPinsFromHighPrecisionEvaluation) {
  const auto c = potassium_like();
  EXPECT_NEAR(ghk_current(0.05, 0, c), 0.03038211074480729, 1e-12 * 0.0304);
  EXPECT_NEAR(ghk_current(-0.03, 0, c), 0.006337832048717758, 1e-12 * 0.0064);
}

TEST(Ghk, ZeroVoltageLimit) {
  const auto c = potassium_like();
  const double limit = 1e-6 * 1 * kFaraday * (0.14 - 0.005);
  EXPECT_NEAR(ghk_current(0.0, 0, c), limit, 1e-9 * limit);
}

TEST(Ghk, ContinuousAcrossZero) {
  const auto c = potassium_like();
  const double i0 = ghk_current(0.0, 0, c);
  // Second-order series in u = zFV/RT around zero.
  for (double v : {1e-9, -1e-9, 1e-7, -1e-7, 1e-5, -1e-5}) {
    const double u = v * kFaraday / (kGasConstant * 300.0);
    const double series = 1e-6 * kFaraday * ((0.14 - 0.005) + u * (0.14 + 0.005) / 2 + u * u * (0.14 - 0.005) / 12);
    EXPECT_NEAR(ghk_current(v, 0, c), series, 1e-9 * i0) << v;
  }
}

TEST(Ghk, VanishesAndFlipsAtNernstPotential) {
  for (int z : {1, 2, -1}) {
    auto c = potassium_like();
    c.z = z;
    const double e = c.nernst();
    const double scale = std::abs(ghk_current(0.0, 0, c));
    EXPECT_LT(std::abs(ghk_current(e, 0, c)), 1e-12 * scale) << "z = " << z;
    const double above = ghk_current(e + 1e-3, 0, c), below = ghk_current(e - 1e-3, 0, c);
    EXPECT_LT(above * below, 0.0);
  }
}

TEST(GhkProperty, SignFlipsForEveryPermeableState) {
  const auto spec = channel5_spec(channel(ChannelKind::Potassium));
  const auto& ion = *spec.ghk;
  const double e = ion.nernst();
  for (std::size_t j = 0; j < 5; ++j) {
    const double above = ghk_current(e + 0.01, j, ion), below = ghk_current(e - 0.01, j, ion);
    if (ion.permeability[j] > 0.0) {
      EXPECT_GT(above, 0.0);
      EXPECT_LT(below, 0.0);
    } else {
      EXPECT_EQ(above, 0.0);
    }
  }
}

TEST(Channel5, PermeableStates) {
  const auto na = channel5_spec(channel(ChannelKind::Sodium));
  const auto k = channel5_spec(channel(ChannelKind::Potassium));
  EXPECT_EQ(na.ghk->permeability, (std::vector<double>{0, 0, 0, 1e-6, 0}));
  EXPECT_EQ(k.ghk->permeability, (std::vector<double>{0, 0, 0, 1e-6, 1e-6}));
}

TEST(Channel5, SigmoidLimitsAndMonotonicity) {
  const auto c = channel(ChannelKind::Sodium);
  const auto spec = channel5_spec(c);
  const auto low = spec.rate_matrix(Input{-10.0});
  const auto high = spec.rate_matrix(Input{10.0});
  auto at = [](const std::vector<double>& m, std::size_t to, std::size_t from) { return m[to * 5 + from]; };
  EXPECT_LT(at(low, 1, 0), 1e-12);
  EXPECT_LT(at(low, 2, 1), 1e-12);
  EXPECT_NEAR(at(high, 1, 0), 20.0, 1e-9);
  EXPECT_NEAR(at(high, 3, 2), 20.0, 1e-9);
  EXPECT_EQ(at(low, 4, 3), 1.0);
  EXPECT_EQ(at(high, 0, 4), 0.2);
  double prev = -1.0;
  for (double v = -0.15; v <= 0.05; v += 0.001) {
    const double r = at(spec.rate_matrix(Input{v}), 1, 0);
    EXPECT_GE(r, prev);
    prev = r;
  }
}

TEST(Channel5, RestsInStateZeroAtMinusSeventyMillivolts) {
  const auto spec = channel5_spec(channel(ChannelKind::Sodium));
  const auto p = integrate(spec, {1.0, 0.0, 0.0, 0.0, 0.0}, Input{-0.070}, 0.002, 20000);
  EXPECT_GT(p[0], 0.95);
}

TEST(Channel5, RejectsNonPositiveAmplitude) {
  auto c = channel(ChannelKind::Sodium);
  c.a21.amplitude = 0.0;
  try {
    channel5_spec(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Config);
  }
}

TEST(PmmJson, SpecAndChannelRoundTrip) {
  const auto spec = channel5_spec(channel(ChannelKind::Potassium));
  const auto back = spec_from_json(to_json(spec));
  EXPECT_EQ(back.n_states, 5u);
  EXPECT_EQ(back.rate_matrix(Input{-0.02}), spec.rate_matrix(Input{-0.02}));
  EXPECT_EQ(back.omega(Input{0.01}, 3), spec.omega(Input{0.01}, 3));
  const auto c = channel5_from_json(to_json(channel(ChannelKind::Sodium)));
  EXPECT_EQ(c.kind, ChannelKind::Sodium);
  EXPECT_EQ(c.a10.midpoint, -0.030);
  EXPECT_THROW(spec_from_json(nlohmann::json::parse(R"({"states": 2, "rates": [{"from": 0, "to": 5,
      "kind": "const", "params": {"value": 1}}]})")),
               Error);
  EXPECT_THROW(spec_from_json(nlohmann::json::parse(R"({"states": 2, "rates": [{"from": 0, "to": 1,
      "kind": "cubic", "params": {}}]})")),
               Error);
}
