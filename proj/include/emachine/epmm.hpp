#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "emachine/error.hpp"
#include "emachine/pmm.hpp"
#include "json.hpp"

namespace emachine::epmm {

using pmm::Input;
using pmm::PmmSpec;

/// N identical independent molecules sharing one input.
struct Ensemble {
  PmmSpec spec;
  std::int64_t n = 0;
  std::vector<std::int64_t> occupations;

  /// All molecules in state s0.
  static Ensemble at_state(PmmSpec spec, std::int64_t n, std::size_t s0 = 0);
  void validate() const;
  std::vector<double> fractions() const;
};

enum class StepMode {
  TauLeap,  ///< binomial departures per state, multinomial split over destinations
  Exact,    ///< event-by-event simulation inside the step; N <= 1000
};

/// Advances occupations over dt at fixed input x. Requires dt * max exit rate <= 0.1.
void ensemble_step(Ensemble& ens, std::span<const double> x, double dt, Rng& rng,
                   StepMode mode = StepMode::TauLeap);

/// Relative occupations evolve exactly like a single molecule's probabilities.
std::vector<double> meanfield_step(const std::vector<double>& e_bar, std::span<const double> x, const PmmSpec& spec,
                                   double dt);

/// y = sum_i N_i omega(x, s_i).
double ensemble_output(const Ensemble& ens, std::span<const double> x);
/// y = N sum_i omega(x, s_i) e_i.
double meanfield_output(std::span<const double> e_bar, std::int64_t n, std::span<const double> x,
                        const PmmSpec& spec);

struct OccupancyStats {
  double mean = 0.0;
  double sigma_abs = 0.0;
  double sigma_rel = 0.0;
};
/// Binomial moments of the occupancy of a state with probability p among n molecules.
OccupancyStats occupancy_stats(double p, std::int64_t n);

/// Constant current injected over [t_on, t_off).
struct Pulse {
  double t_on = 0.0;
  double t_off = 0.0;
  double amplitude = 0.0;
};

/// C_m dV/dt = -sum(ensemble currents) - g_leak (V - e_leak) + I_stim(t).
struct MembraneModel {
  double c_m = 1.0;
  double g_leak = 0.1;
  double e_leak = -0.070;
  std::vector<Pulse> stimulus;
  double max_dv = 1e-3;  ///< largest voltage change allowed in one step

  void validate() const;
  double stimulus_at(double t) const;
};

/// One ensemble's output low-pass filtered into another ensemble's second input component.
struct ChemicalLink {
  std::size_t source = 0;
  std::size_t target = 0;
  double gain = 1.0;
  double tau = 1.0;
};

struct CoupledSystem {
  MembraneModel membrane;
  std::vector<Ensemble> ensembles;
  std::vector<ChemicalLink> links;
  double v = -0.070;
  double t = 0.0;
  /// Messenger level feeding each ensemble's second input component.
  std::vector<double> messenger;
  StepMode mode = StepMode::TauLeap;
  /// Follow mean-field occupations instead of sampling.
  bool meanfield = false;
  std::vector<std::vector<double>> e_bar;

  void validate() const;
  Input input_of(std::size_t k) const;
  std::vector<double> fractions(std::size_t k) const;
};

struct CoupledStepResult {
  std::vector<double> currents;
  double stimulus = 0.0;
};

/// Ensembles advance at fixed V, then V and the messengers advance with the
/// resulting currents. `rngs` holds one stream per ensemble.
CoupledStepResult coupled_step(CoupledSystem& sys, double dt, std::span<Rng> rngs);

/// Runs task(i) for i in [0, count) on `workers` threads; results are stored
/// by index, so they do not depend on the worker count as long as each task
/// derives its randomness from i alone.
template <class Result>
std::vector<Result> run_batch(std::size_t count, std::size_t workers, const std::function<Result(std::size_t)>& task) {
  std::vector<Result> results(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        results[i] = task(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, count));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace emachine::epmm
