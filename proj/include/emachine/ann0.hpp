#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emachine/codes.hpp"
#include "emachine/error.hpp"

namespace emachine::ann0 {

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  static Matrix identity(std::size_t n);

  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
};

/// Three-layer winner-take-all network: input gains gx (n x m), output gains gy (k x n).
struct Ann0Params {
  double alpha = 1.5;       ///< local excitatory feedback gain
  double beta = 2.0;        ///< global inhibitory feedback gain
  double tau = 1.0;         ///< time constant of the intermediate layer
  double noise_amp = 1e-6;  ///< uniform potential noise per integration step
  Matrix gx;
  Matrix gy;

  std::size_t n() const noexcept { return gx.rows; }
  std::size_t m() const noexcept { return gx.cols; }
  std::size_t k() const noexcept { return gy.rows; }
  bool wta_regime() const noexcept { return 1.0 < alpha && alpha < 1.0 + beta; }
  void validate() const;
};

struct Ann0State {
  std::vector<double> u;
  double t = 0.0;
};

std::vector<double> synaptic_currents(std::span<const double> x, const Ann0Params& p);
std::vector<double> output_projection(std::span<const double> r, const Ann0Params& p);
/// r_i = max(u_i, 0).
std::vector<double> rectify(std::span<const double> u);
/// q = beta * sum(r) + x_inh.
double inhibition(std::span<const double> u, double x_inh, const Ann0Params& p);

/// Called after every step with the new state and the inhibition input in force.
using Observer = std::function<void(const Ann0State&, double x_inh)>;

/// Advances tau du/dt + u = s + alpha r - q with fixed-step RK4 over `steps`
/// steps of size dt, then adds the per-step noise. Requires dt <= tau / 50.
void integrate(Ann0State& state, std::span<const double> s, double x_inh, const Ann0Params& p, double dt,
               std::size_t steps, Rng& rng, const Observer& observe = {});

/// Explicit solution for the neurons in `active` while that set stays active
/// and the inputs stay constant. Returns u for each listed neuron, in order.
std::vector<double> closed_form_u(const Ann0Params& p, std::span<const double> s, std::span<const double> u0,
                                  double x_inh, std::span<const std::size_t> active, double t);

struct WtaResult {
  std::size_t winner = 0;
  double settle_time = 0.0;
};

/// Integrates from u = 0 until a single neuron stays active for a full tau.
/// Throws Errc::NonConvergence after 1000 tau.
WtaResult run_wta(const Ann0Params& p, std::span<const double> s, double x_inh, std::uint64_t seed,
                  double dt = 0.0);

/// Cycle timing for driving the network as a symbolic machine.
struct DriveSchedule {
  double dt_psy = 100.0;               ///< psychological step; must be >= 10 tau
  double dt = 0.0;                     ///< integration step, default tau / 100
  double threshold_inh = 0.0;          ///< x_inh during the input half-cycle
  std::optional<double> reset_inh;     ///< x_inh during the quiet half-cycle; default 10 max(s)
  double reset_tolerance = 1e-6;       ///< max r allowed at the end of the quiet half-cycle
};

struct DriveResult {
  std::vector<std::vector<double>> raw_outputs;            ///< y sampled at t_v + dt_psy / 2
  std::vector<std::optional<codes::SymbolVector>> outputs;  ///< decoded output codes, nullopt = NULL
  std::vector<std::string> warnings;
};

/// Network parameters whose gains hold a program: gx rows are the input codes,
/// gy columns the output codes.
Ann0Params params_from_program(std::span<const codes::SymbolVector> inputs,
                               std::span<const codes::SymbolVector> outputs, double alpha = 1.5,
                               double beta = 2.0, double tau = 1.0, double noise_amp = 1e-6);

/// Identifies y with the candidate code of the same direction (cosine within
/// 1e-6). Returns nullopt when |y| is below `floor`.
std::optional<codes::SymbolVector> decode_output(std::span<const double> y,
                                                 std::span<const codes::SymbolVector> candidates,
                                                 double floor = 1e-9);

/// Presents each input in the first half of a cycle and silences the network
/// in the second half; samples y at the end of the first half.
DriveResult drive_as_symbol_machine(const Ann0Params& p, const DriveSchedule& schedule,
                                    std::span<const codes::SymbolVector> inputs, std::uint64_t seed,
                                    const Observer& observe = {});

}  // namespace emachine::ann0
