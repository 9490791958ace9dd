#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "emachine/error.hpp"
#include "json.hpp"

namespace emachine::machines {

using Label = std::string;

/// Label of a product symbol (a, b); components are joined with '|'.
Label pair_label(const Label& a, const Label& b);
/// Inverse of pair_label; nullopt when the label has no single separator.
std::optional<std::pair<Label, Label>> split_pair_label(const Label& label);

/// Ordered finite set of labels.
class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(std::vector<Label> symbols);

  std::size_t size() const noexcept { return symbols_.size(); }
  const Label& operator[](std::size_t i) const { return symbols_[i]; }
  const std::vector<Label>& symbols() const noexcept { return symbols_; }
  bool contains(const Label& s) const { return index_.contains(s); }
  std::optional<std::size_t> find(const Label& s) const;
  /// Like find, but throws Errc::Rejection naming `what` for unknown labels.
  std::size_t index_of(const Label& s, const char* what = "symbol") const;

  /// Same symbols regardless of order.
  bool same_set(const Alphabet& other) const;

  auto begin() const { return symbols_.begin(); }
  auto end() const { return symbols_.end(); }

 private:
  std::vector<Label> symbols_;
  std::map<Label, std::size_t> index_;
};

/// Memoryless machine y = f(x) over finite alphabets.
struct CombinatorialMachine {
  Alphabet inputs;
  Alphabet outputs;
  std::vector<std::size_t> table;  ///< table[x] = index of f(x) in outputs

  CombinatorialMachine() = default;
  CombinatorialMachine(Alphabet x, Alphabet y, std::vector<std::size_t> f);
  /// Builds from (x, y) label pairs; every input must appear exactly once.
  static CombinatorialMachine from_pairs(Alphabet x, Alphabet y,
                                         const std::vector<std::pair<Label, Label>>& rows);

  const Label& apply(const Label& x) const;
};

/// Exact rational probability num/den.
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;
  double value() const { return double(num) / double(den); }
};

/// Memoryless machine with P{y = b | x = a} = delta(a, b).
struct ProbabilisticCombinatorialMachine {
  Alphabet inputs;
  Alphabet outputs;
  std::vector<std::vector<Fraction>> delta;  ///< delta[x][y]

  ProbabilisticCombinatorialMachine() = default;
  ProbabilisticCombinatorialMachine(Alphabet x, Alphabet y, std::vector<std::vector<Fraction>> d);

  double probability(const Label& x, const Label& y) const;
};

/// Finite-state machine with y = omega(x, s), s' = next(x, s).
struct MealyMachine {
  Alphabet inputs;
  Alphabet outputs;
  Alphabet states;
  std::size_t s0 = 0;
  std::vector<std::size_t> omega;  ///< indexed x * |S| + s
  std::vector<std::size_t> next;   ///< indexed x * |S| + s

  MealyMachine() = default;
  MealyMachine(Alphabet x, Alphabet y, Alphabet s, std::size_t initial, std::vector<std::size_t> out,
               std::vector<std::size_t> nxt);

  std::size_t slot(std::size_t x, std::size_t s) const { return x * states.size() + s; }
};

std::vector<Label> run_combinatorial(const CombinatorialMachine& m, std::span<const Label> xs);
std::vector<Label> run_mealy(const MealyMachine& m, std::span<const Label> xs);

/// Outputs drawn independently per cycle from delta(x, .). Reproducible for a given seed.
std::vector<Label> sample_probabilistic(const ProbabilisticCombinatorialMachine& m,
                                        std::span<const Label> xs, std::uint64_t seed);

/// Closes a combinatorial machine over X_ext x S -> Y_ext x S with a one-cycle
/// delayed feedback loop. Input and output labels must be pair labels that
/// factor into a full product with the feedback alphabet.
MealyMachine wrap_delayed_feedback(const CombinatorialMachine& m, const Label& s0);

/// A combinatorial step with its output fed back one cycle later. Works with
/// any step function, so it can wrap associative fields as well as tables.
class DelayedFeedbackLoop {
 public:
  using Step = std::function<std::pair<Label, Label>(const Label& x, const Label& s)>;

  DelayedFeedbackLoop(Step step, Label s0) : step_(std::move(step)), s0_(std::move(s0)), s_(s0_) {}

  void reset() { s_ = s0_; }
  Label step(const Label& x);
  const Label& feedback() const noexcept { return s_; }

 private:
  Step step_;
  Label s0_;
  Label s_;
};

/// A machine observed only through its inputs and outputs.
struct BlackBox {
  Alphabet inputs;
  Alphabet outputs;  ///< may be empty when the output set is not declared
  std::function<void()> reset;
  std::function<Label(const Label&)> step;
};

BlackBox black_box(const CombinatorialMachine& m);
BlackBox black_box(const MealyMachine& m);
BlackBox black_box(const ProbabilisticCombinatorialMachine& m, std::uint64_t seed);

/// Every input once, from a reset machine.
struct ExhaustiveProbe {};
/// Every input sequence of exactly `depth` symbols, each from a reset machine.
struct DepthProbe {
  std::size_t depth = 1;
};
/// `samples` draws per input; frequencies must fall within k standard deviations.
struct MonteCarloProbe {
  std::size_t samples = 10000;
  double k = 3.0;
};

struct EquivalenceVerdict {
  bool equivalent = true;
  std::vector<Label> witness;  ///< shortest distinguishing input sequence found
  std::vector<Label> outputs_a;
  std::vector<Label> outputs_b;
  std::string detail;
};

EquivalenceVerdict equivalent(const BlackBox& a, const BlackBox& b, ExhaustiveProbe probe);
EquivalenceVerdict equivalent(const BlackBox& a, const BlackBox& b, DepthProbe probe);
/// Compares a sampled black box against a reference distribution.
EquivalenceVerdict equivalent(const BlackBox& sampler, const ProbabilisticCombinatorialMachine& reference,
                              MonteCarloProbe probe);

// JSON schemas:
//   combinatorial: {"alphabet_x": [...], "alphabet_y": [...], "table": [["x","y"], ...]}
//   mealy:         {"alphabet_x", "alphabet_y", "states", "s0", "table": [["x","s","y","s_next"], ...]}
//   probabilistic: {"alphabet_x", "alphabet_y", "delta": [["x","y",num,den], ...]}
CombinatorialMachine combinatorial_from_json(const nlohmann::json& j);
MealyMachine mealy_from_json(const nlohmann::json& j);
ProbabilisticCombinatorialMachine probabilistic_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CombinatorialMachine& m);
nlohmann::json to_json(const MealyMachine& m);

}  // namespace emachine::machines
