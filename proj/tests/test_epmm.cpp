#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "emachine/epmm.hpp"

using namespace emachine;
using namespace emachine::epmm;
using pmm::RateEntry;

namespace {

PmmSpec two_state(double a10, double a01, std::vector<double> omega = {0.0, 1.0}) {
  PmmSpec s;
  s.n_states = 2;
  s.rates = {{0, 1, RateEntry::Kind::Const, a10}, {1, 0, RateEntry::Kind::Const, a01}};
  s.omega_table = std::move(omega);
  return s;
}

const Input kX{0.0};

std::int64_t total(const Ensemble& e) { return std::accumulate(e.occupations.begin(), e.occupations.end(), std::int64_t{0}); }

}  // namespace

TEST(EnsembleStep, ZeroRatesKeepOccupations) {
  auto ens = Ensemble::at_state(two_state(0.0, 0.0), 50, 1);
  Rng rng(1);
  for (int k = 0; k < 100; ++k) ensemble_step(ens, kX, 0.01, rng);
  EXPECT_EQ(ens.occupations, (std::vector<std::int64_t>{0, 50}));
}

TEST(EnsembleStepProperty, ConservesMoleculesInBothModes) {
  PmmSpec ring;
  ring.n_states = 3;
  ring.rates = {{0, 1, RateEntry::Kind::Const, 4.0}, {1, 2, RateEntry::Kind::Const, 2.0},
                {2, 0, RateEntry::Kind::Const, 1.0}, {1, 0, RateEntry::Kind::Const, 3.0}};
  for (auto mode : {StepMode::TauLeap, StepMode::Exact}) {
    auto ens = Ensemble::at_state(ring, 777);
    Rng rng(2);
    for (int k = 0; k < 2000; ++k) {
      ensemble_step(ens, kX, 0.01, rng, mode);
      ASSERT_EQ(total(ens), 777);
      for (auto n : ens.occupations) ASSERT_GE(n, 0);
    }
  }
}

TEST(EnsembleStep, ExactModeLimitedToSmallEnsembles) {
  auto ens = Ensemble::at_state(two_state(1.0, 1.0), 1001);
  Rng rng(1);
  try {
    ensemble_step(ens, kX, 0.01, rng, StepMode::Exact);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Config);
  }
}

TEST(EnsembleStep, SingleMoleculeMatchesPathOccupancy) {
  const auto spec = two_state(2.0, 3.0);
  const int runs = 10000;
  const double t = 0.3, dt = 0.01;
  int leap = 0, exact = 0, path = 0;
  for (int k = 0; k < runs; ++k) {
    for (auto mode : {StepMode::TauLeap, StepMode::Exact}) {
      auto ens = Ensemble::at_state(spec, 1);
      Rng rng(derive_seed(mode == StepMode::Exact ? 11 : 12, k));
      for (int s = 0; s < 30; ++s) ensemble_step(ens, kX, dt, rng, mode);
      (mode == StepMode::Exact ? exact : leap) += ens.occupations[1];
    }
    path += pmm::state_at(pmm::sample_path(spec, {{0.0, kX}}, 0, t, derive_seed(13, k)), t) == 1;
  }
  const double p1 = 0.4 * (1.0 - std::exp(-5.0 * t));
  const double tol = 3.0 * std::sqrt(p1 * (1 - p1) / runs);
  EXPECT_NEAR(double(path) / runs, p1, tol);
  EXPECT_NEAR(double(exact) / runs, p1, tol);
  // Tau-leaping carries an O(dt) bias on top of the sampling noise.
  EXPECT_NEAR(double(leap) / runs, p1, tol + 0.01);
}

TEST(EnsembleStep, SymmetricLongRunIsBinomial) {
  auto ens = Ensemble::at_state(two_state(1.0, 1.0), 1000);
  Rng rng(3);
  for (int k = 0; k < 1000; ++k) ensemble_step(ens, kX, 0.01, rng);
  EXPECT_NEAR(double(ens.occupations[0]), 500.0, 3.0 * std::sqrt(1000 * 0.25));
}

TEST(MeanField, EqualsMasterStepAndReachesBalance) {
  const auto spec = two_state(2.0, 3.0);
  std::vector<double> e{1.0, 0.0};
  for (int k = 0; k < 1000; ++k) {
    const auto next = meanfield_step(e, kX, spec, 0.01);
    EXPECT_EQ(next, pmm::master_step(e, kX, spec, 0.01));
    EXPECT_LT(pmm::conservation_residual(next), 1e-9);
    for (double v : next) EXPECT_GE(v, 0.0);
    e = next;
  }
  EXPECT_NEAR(e[1], 2.0 / 5.0, 1e-9);
}

TEST(Output, Examples) {
  auto ens = Ensemble::at_state(two_state(1.0, 1.0, {1.0, 2.0}), 10);
  ens.occupations = {4, 6};
  EXPECT_DOUBLE_EQ(ensemble_output(ens, kX), 16.0);
  EXPECT_DOUBLE_EQ(meanfield_output(std::vector<double>{0.4, 0.6}, 10, kX, ens.spec), 16.0);
  const auto silent = Ensemble::at_state(two_state(1.0, 1.0, {0.0, 2.0}), 10, 0);
  EXPECT_EQ(ensemble_output(silent, kX), 0.0);
}

TEST(OccupancyStats, Examples) {
  const auto s = occupancy_stats(0.5, 100);
  EXPECT_DOUBLE_EQ(s.mean, 50.0);
  EXPECT_DOUBLE_EQ(s.sigma_abs, 5.0);
  EXPECT_DOUBLE_EQ(s.sigma_rel, 0.05);
  EXPECT_EQ(occupancy_stats(0.0, 100).sigma_abs, 0.0);
  EXPECT_EQ(occupancy_stats(1.0, 100).sigma_rel, 0.0);
}

TEST(OccupancyStats, EmpiricalSpreadWithinFivePercent) {
  const auto spec = two_state(2.0, 3.0);
  const int runs = 10000;
  const std::int64_t n = 200;
  auto finals = run_batch<double>(runs, 2, [&](std::size_t k) {
    auto ens = Ensemble::at_state(spec, n);
    Rng rng(derive_seed(21, k));
    for (int s = 0; s < 150; ++s) ensemble_step(ens, kX, 0.02, rng);
    return double(ens.occupations[1]) / double(n);
  });
  const double mean = std::accumulate(finals.begin(), finals.end(), 0.0) / runs;
  double var = 0.0;
  for (double f : finals) var += (f - mean) * (f - mean);
  const double sd = std::sqrt(var / (runs - 1));
  const double p = 0.4 * (1.0 - std::exp(-5.0 * 3.0));
  EXPECT_NEAR(sd, occupancy_stats(p, n).sigma_rel, 0.05 * occupancy_stats(p, n).sigma_rel);
}

TEST(RunBatch, IndependentOfWorkerCount) {
  const auto spec = two_state(2.0, 3.0);
  auto task = [&](std::size_t k) {
    auto ens = Ensemble::at_state(spec, 300);
    Rng rng(derive_seed(9, k));
    for (int s = 0; s < 50; ++s) ensemble_step(ens, kX, 0.01, rng);
    return ens.occupations;
  };
  const auto one = run_batch<std::vector<std::int64_t>>(40, 1, task);
  const auto three = run_batch<std::vector<std::int64_t>>(40, 3, task);
  EXPECT_EQ(one, three);
}

TEST(RunBatch, PropagatesErrors) {
  EXPECT_THROW(run_batch<int>(10, 2,
                              [](std::size_t k) -> int {
                                if (k == 7) fail(Errc::Stuck, "boom");
                                return 0;
                              }),
               Error);
}

TEST(Coupled, LeakOnlyRelaxesToReversal) {
  CoupledSystem sys;
  sys.v = 0.0;
  sys.validate();
  for (int k = 0; k < 20000; ++k) coupled_step(sys, 0.01, {});
  EXPECT_NEAR(sys.v, sys.membrane.e_leak, 1e-6);
}

TEST(Coupled, StepSizeGuard) {
  CoupledSystem sys;
  sys.v = 1.0;
  try {
    coupled_step(sys, 0.5, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::StepSize);
  }
}

TEST(Coupled, MessengerLowPassesSourceOutput) {
  CoupledSystem sys;
  sys.membrane.g_leak = 0.0;
  sys.membrane.max_dv = 1.0;
  auto src = two_state(0.0, 0.0, {0.01, 0.01});
  // Target rate 0 -> 1 switches on with the messenger (second input component).
  PmmSpec target;
  target.n_states = 2;
  target.rates = {{0, 1, RateEntry::Kind::Sigmoid, 5.0, 50.0, 1.0, 1}};
  target.omega_table = {0.0, 0.0};
  sys.ensembles = {Ensemble::at_state(src, 100), Ensemble::at_state(target, 100)};
  sys.links = {{0, 1, 100.0, 2.0}};
  sys.validate();
  std::vector<Rng> rngs{Rng(1), Rng(2)};
  for (int k = 0; k < 2000; ++k) coupled_step(sys, 0.01, rngs);
  // Messenger approaches gain * output = 100 with time constant 2.
  EXPECT_NEAR(sys.messenger[1], 100.0 * (1.0 - std::exp(-20.0 / 2.0)), 0.5);
  EXPECT_GT(sys.ensembles[1].occupations[1], 90);
}

TEST(Coupled, SecondLinkToSameTargetIsRejected) {
  CoupledSystem sys;
  sys.ensembles = {Ensemble::at_state(two_state(1, 1), 10), Ensemble::at_state(two_state(1, 1), 10)};
  sys.links = {{0, 1, 1.0, 1.0}, {1, 1, 1.0, 1.0}};
  EXPECT_THROW(sys.validate(), Error);
}
