#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emachine/codes.hpp"
#include "emachine/error.hpp"
#include "emachine/machines.hpp"
#include "json.hpp"

namespace emachine::afield {

using codes::SymbolVector;

inline constexpr std::size_t kDefaultCapacity = 65536;

/// Paired Input-LTM / Output-LTM rows. The write pointer is the row count.
class AssociativeProgram {
 public:
  explicit AssociativeProgram(std::size_t capacity = kDefaultCapacity) : capacity_(capacity) {}

  std::size_t size() const noexcept { return gx_.size(); }
  std::size_t wptr() const noexcept { return gx_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return gx_.empty(); }

  std::span<const SymbolVector> inputs() const noexcept { return gx_; }
  std::span<const SymbolVector> outputs() const noexcept { return gy_; }
  const SymbolVector& input(std::size_t i) const { return gx_.at(i); }
  const SymbolVector& output(std::size_t i) const { return gy_.at(i); }

  bool contains(const SymbolVector& x, const SymbolVector& y) const;
  /// Writes (x, y) at the write pointer. Throws Errc::MemoryFull at capacity.
  void append(const SymbolVector& x, const SymbolVector& y);

 private:
  std::vector<SymbolVector> gx_;
  std::vector<SymbolVector> gy_;
  std::size_t capacity_;
};

/// Residual excitation per row, with its bias coefficients.
struct EState {
  std::vector<double> e;
  double tau_e = 10.0;    ///< discharge constant in cycles, > 1
  double bias_add = 0.0;  ///< additive bias coefficient
  double bias_mul = 0.0;  ///< multiplicative bias coefficient

  void validate() const;
};

/// Which score step (5) compares against the output threshold.
enum class EncodeGuard { RawSimilarity, BiasedSimilarity };

struct AfConfig {
  codes::SimilarityKind similarity = codes::SimilarityKind::NonzeroMatchRatio;
  double xinh = 0.5;
  std::uint64_t seed = 0;
  bool estates_enabled = false;  ///< AF-1 when set, AF-0 otherwise
  bool dedup = true;             ///< skip recording pairs already stored
  EncodeGuard guard = EncodeGuard::RawSimilarity;
};

std::vector<double> decode(const SymbolVector& x, const AssociativeProgram& prog, codes::SimilarityKind kind);
/// se[i] = s[i] + a e[i] + b s[i] e[i]
std::vector<double> bias(std::span<const double> s, const EState& estate);
/// Uniform draw from the indices within kScoreEpsilon of max(se).
std::size_t choose(std::span<const double> se, Rng& rng);
/// gy[win] when score[win] > xinh, NULL otherwise.
std::optional<SymbolVector> encode(std::size_t win, std::span<const double> score, const AssociativeProgram& prog,
                                   double xinh);
/// Instant charge when s > e, otherwise discharge by (tau_e - 1) / tau_e.
void next_estate(std::span<const double> s, EState& estate);
/// Tape-recording learning. Returns true when a row was written.
bool learn(const SymbolVector& x, const SymbolVector& y, bool wen, AssociativeProgram& prog, bool dedup);

/// Everything one cycle computed, for tracing.
struct CycleRecord {
  std::vector<double> s;
  std::vector<double> se;
  std::optional<std::size_t> win;
  std::optional<SymbolVector> y;
  bool learned = false;
};

/// One primitive E-machine: program, optional E-states and a private RNG stream.
class AssociativeField {
 public:
  explicit AssociativeField(AfConfig config, AssociativeProgram program = AssociativeProgram{},
                            EState estate = EState{});

  /// decode, bias, choose, encode, next E-state. No learning.
  std::optional<SymbolVector> cycle(const SymbolVector& x);
  /// Same cycle with the output clamped to `forced` and the pair recorded.
  const SymbolVector& cycle_forced(const SymbolVector& x, const SymbolVector& forced);

  const CycleRecord& last() const noexcept { return last_; }
  const AfConfig& config() const noexcept { return config_; }
  const AssociativeProgram& program() const noexcept { return program_; }
  AssociativeProgram& program() noexcept { return program_; }
  const EState& estate() const noexcept { return estate_; }
  void set_estate(EState estate);
  /// Zeroes the E-states and reseeds the choice stream.
  void reset();

 private:
  void run(const SymbolVector& x);
  void sync_estate();

  AfConfig config_;
  AssociativeProgram program_;
  EState estate_;
  Rng rng_;
  CycleRecord last_;
};

/// One row per input: (code(x), code(f(x))).
AssociativeProgram program_from_machine(const machines::CombinatorialMachine& m, const codes::Codebook& in,
                                        const codes::Codebook& out);
/// Duplicated rows realizing rational output probabilities: per input, row
/// multiplicities are the numerators over the common denominator.
AssociativeProgram program_from_probabilistic(const machines::ProbabilisticCombinatorialMachine& m,
                                              const codes::Codebook& in, const codes::Codebook& out);
/// Every (x, y) pair of X x Y once, x-major.
AssociativeProgram full_program(const codes::Codebook& in, const codes::Codebook& out);

/// E-state selecting machine `m` from a program holding every pair of X x Y:
/// e = 1 on rows of m's graph, 0 elsewhere; tau_e = 1e6, a = 0, b = 1.
/// Throws Errc::Coverage listing missing pairs.
EState reconfigure(const AssociativeProgram& prog, const machines::CombinatorialMachine& m,
                   const codes::Codebook& in, const codes::Codebook& out);

/// Black-box view of a field as a combinatorial machine. Outputs are decoded
/// with `out`; NULL reads as "NULL". reset() restores the E-state held at
/// creation and the seed. The field and codebooks must outlive the view.
machines::BlackBox combinatorial_view(AssociativeField& field, const codes::Codebook& in,
                                      const codes::Codebook& out);

inline const machines::Label kNullLabel = "NULL";

/// Input layout [external input | fed-back state], output layout
/// [external output | next state]; the state field is delayed one cycle.
struct FeedbackLayout {
  codes::Codebook inputs;
  codes::Codebook states;
  codes::Codebook outputs;
  machines::Label s0;
};

/// An associative field closed by a one-cycle delayed feedback, viewed as a Mealy machine.
class AfMealyView {
 public:
  AfMealyView(AssociativeField& field, FeedbackLayout layout);
  AfMealyView(const AfMealyView&) = delete;
  AfMealyView& operator=(const AfMealyView&) = delete;

  void reset();
  machines::Label step(const machines::Label& x);
  machines::BlackBox black_box();
  const FeedbackLayout& layout() const noexcept { return layout_; }

 private:
  std::pair<machines::Label, machines::Label> combinational(const machines::Label& x, const machines::Label& s);

  AssociativeField* field_;
  FeedbackLayout layout_;
  machines::DelayedFeedbackLoop loop_;
};

/// Trains `field` on a Mealy teacher through the delayed feedback loop: each
/// cycle the teacher's (y, s') is forced and recorded. Random input sequences
/// from `seed` run until every (x, s) reachable from s0 has been demonstrated.
/// Returns the number of demonstrated cycles.
std::size_t demonstrate(AssociativeField& field, const machines::MealyMachine& teacher, const FeedbackLayout& layout,
                        std::uint64_t seed, std::size_t max_cycles = 100000);

/// Codebooks that one-hot encode each of a Mealy machine's alphabets.
FeedbackLayout one_hot_layout(const machines::MealyMachine& m);

// Program files: {"rows": [{"x": [...], "y": [...]}, ...]}; E-state snapshots: JSON array.
nlohmann::json to_json(const AssociativeProgram& prog);
AssociativeProgram program_from_json(const nlohmann::json& j, std::size_t capacity = kDefaultCapacity);
nlohmann::json to_json(const EState& estate);
/// Replaces e in `base` with the array in `j`; coefficients are kept.
EState estate_from_json(const nlohmann::json& j, EState base = EState{});

}  // namespace emachine::afield
