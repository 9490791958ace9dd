#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace emachine {

/// Failure categories raised by the simulation modules.
enum class Errc {
  Config,               ///< invalid parameters, schema violations, dimension mismatches
  Rejection,            ///< input symbol outside a machine's alphabet
  NumericalDivergence,  ///< non-finite state in an integrator
  SingularParameter,    ///< closed form undefined for the given parameters
  NonConvergence,       ///< dynamics failed to settle in the allotted time
  ResetFailure,         ///< activity survived the inhibition half-cycle
  NoSelection,          ///< choice over an empty score set
  MemoryFull,           ///< program capacity exhausted
  Coverage,             ///< program lacks required associations
  TeacherFault,         ///< teacher saw a symbol it cannot handle
  Stuck,                ///< motor field produced no command
  ImageryGap,           ///< imagery field cannot predict the next sensation
  StepSize,             ///< time step too coarse for the rates involved
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

  /// Config errors are caller mistakes; the rest happen at run time.
  bool is_validation() const noexcept { return code_ == Errc::Config; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

using Rng = std::mt19937_64;

/// Mixes a master seed with a stream index (splitmix64 finalizer) so that
/// independent substreams can be derived without sharing generator state.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept;

}  // namespace emachine
