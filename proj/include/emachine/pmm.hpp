#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emachine/error.hpp"
#include "json.hpp"

namespace emachine::pmm {

inline constexpr double kFaraday = 9.6484e4;  // C/mol
inline constexpr double kGasConstant = 8.3144;  // J/(K mol)

using Input = std::vector<double>;
using ProbabilityVector = std::vector<double>;

/// Transition rate density from one state to another as a function of one input component.
struct RateEntry {
  enum class Kind { Const, Sigmoid };
  std::size_t from = 0;
  std::size_t to = 0;
  Kind kind = Kind::Const;
  double amplitude = 0.0;  ///< constant value, or the sigmoid's upper limit
  double midpoint = 0.0;   ///< sigmoid half-activation input
  double slope = 1.0;      ///< sigmoid width; rate = A / (1 + exp(-(x - mid) / slope))
  std::size_t input = 0;   ///< component of x the rate depends on

  double eval(std::span<const double> x) const;
};

struct ChannelParams {
  std::vector<double> permeability;  ///< per state [cm/s]
  int z = 1;
  double temperature = 300.0;  ///< K
  double c_in = 0.14;          ///< mol
  double c_out = 0.005;        ///< mol

  void validate(std::size_t n_states) const;
  double nernst() const;  ///< reversal potential [V]
};

/// GHK current of state j at membrane potential V [V].
double ghk_current(double v, std::size_t j, const ChannelParams& params);

struct PmmSpec {
  std::size_t n_states = 0;
  std::vector<RateEntry> rates;
  /// Output per state: a constant table, or GHK currents of x[voltage_input].
  std::vector<double> omega_table;
  std::optional<ChannelParams> ghk;
  std::size_t voltage_input = 0;

  void validate() const;
  /// Dense generator: rate(to, from) at index to * n + from. Diagonal unused.
  std::vector<double> rate_matrix(std::span<const double> x) const;
  double exit_rate(std::span<const double> x, std::size_t from) const;
  double max_exit_rate(std::span<const double> x) const;
  double omega(std::span<const double> x, std::size_t state) const;
};

/// Advances dP/dt by one RK4 step. Requires dt * max exit rate <= 0.1.
ProbabilityVector master_step(const ProbabilityVector& p, std::span<const double> x, const PmmSpec& spec, double dt);
/// Same, for a precomputed rate matrix.
ProbabilityVector master_step(const ProbabilityVector& p, std::span<const double> rates, double dt);
double conservation_residual(std::span<const double> p);

/// Input held at x from time t until the next segment starts.
struct InputSegment {
  double t = 0.0;
  Input x;
};
using InputSignal = std::vector<InputSegment>;

struct Transition {
  double t = 0.0;
  std::size_t state = 0;
};

/// Exact path sampling; the first entry is (0, s0). Dwell clocks restart at
/// input switch points.
std::vector<Transition> sample_path(const PmmSpec& spec, const InputSignal& signal, std::size_t s0, double t_end,
                                    std::uint64_t seed);
/// State occupied at time t along a path.
std::size_t state_at(std::span<const Transition> path, double t);

struct SigmoidRate {
  double amplitude = 1.0;
  double midpoint = 0.0;  ///< V
  double slope = 0.005;   ///< V
};

enum class ChannelKind { Sodium, Potassium };

/// Five-state forward ring 0 -> 1 -> 2 -> 3 -> 4 -> 0 driven by the membrane potential x[0].
struct Channel5Params {
  ChannelKind kind = ChannelKind::Sodium;
  SigmoidRate a10;
  SigmoidRate a21;
  SigmoidRate a32;
  double a43 = 1.0;
  double a04 = 0.2;
  double p_open = 1e-6;  ///< permeability of the conducting states
  ChannelParams ion;     ///< permeabilities are filled in by channel5_spec
};

PmmSpec channel5_spec(const Channel5Params& params);

nlohmann::json to_json(const PmmSpec& spec);
PmmSpec spec_from_json(const nlohmann::json& j);
InputSignal signal_from_json(const nlohmann::json& j);
// {"kind": "sodium"|"potassium", "a10"/"a21"/"a32": {"amplitude", "midpoint", "slope"},
//  "a43", "a04", "p_open", "ion": {"z", "temperature", "c_in", "c_out"}}
Channel5Params channel5_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Channel5Params& params);

}  // namespace emachine::pmm
