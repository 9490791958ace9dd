#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "emachine/afield.hpp"
#include "emachine/codes.hpp"
#include "emachine/error.hpp"
#include "json.hpp"

namespace emachine::robot {

using Symbol = std::string;

// Tape alphabet. '#' marks both ends of the tape.
inline const std::vector<Symbol> kTapeSymbols = {"(", ")", "_", "*", "Y", "N", "#"};
inline const Symbol kBoundary = "#";
/// Placeholder for "no command" / "nothing uttered yet".
inline const Symbol kNone = "-";
inline const std::vector<Symbol> kWriteSymbols = {"-", "*", "Y", "N"};
inline const std::vector<Symbol> kMoveSymbols = {"-", "L", "R", "S"};
inline const std::vector<Symbol> kUtterSymbols = {"-", "R", "L", "C", "F", "Y", "N"};

enum class Move { Left, Right, Stay };
const char* to_symbol(Move m) noexcept;
Move move_from_symbol(const Symbol& s);

struct MotorCommand {
  std::optional<Symbol> write;
  Move move = Move::Stay;
  std::optional<Symbol> utter;
  bool halt = false;

  friend bool operator==(const MotorCommand&, const MotorCommand&) = default;
};

/// What the robot perceives: the scanned cell, last cycle's utterance, and
/// (proprioceptively) the eye position.
struct Sensory {
  Symbol seen;
  Symbol uttered_feedback = kNone;
  std::size_t position = 0;

  friend bool operator==(const Sensory&, const Sensory&) = default;
};

struct TapeWorld {
  std::vector<Symbol> cells;
  std::size_t position = 0;

  /// "#" + input + "#", eye on the first input cell (or the right boundary).
  static TapeWorld from_input(const std::string& input);
  std::string to_string() const;
};

struct Devices {
  Symbol last_uttered = kNone;
};

/// Write, then move (clamped at the ends), then read; the utterance is buffered for one cycle.
Sensory world_step(TapeWorld& world, Devices& devices, const MotorCommand& cmd);
Sensory observe(const TapeWorld& world, const Devices& devices);

/// Parenthesis checker whose state lives entirely in the utter channel.
/// Throws Errc::TeacherFault on symbols outside the tape alphabet.
MotorCommand teacher_policy(const Sensory& obs);

struct BrainConfig {
  std::size_t max_cells = 16;  ///< tape length the position code can address
  std::uint64_t seed = 0;
  double image_tau_e = 1e4;
  double image_xinh = 0.25;
  double exact_xinh = 0.99;
  std::size_t max_cycles = 10000;
};

/// AM plus the three fields standing in for AS: kinematics (position, move)
/// -> position, speech (utter) -> uttered, and the tape image
/// (position, symbol, mode) -> symbol.
struct Brain {
  BrainConfig config;
  afield::AssociativeField am;
  afield::AssociativeField kinematics;
  afield::AssociativeField speech;
  afield::AssociativeField image;

  explicit Brain(BrainConfig cfg = {});
  void reset();
};

enum class Source { Teacher, Am };
enum class SensorySource { World, Imagery };

struct TraceRow {
  std::size_t cycle = 0;
  Sensory sensory;
  MotorCommand command;
  Source source = Source::Teacher;
  SensorySource sensory_source = SensorySource::World;
};

struct Episode {
  std::vector<TraceRow> trace;
  std::optional<Symbol> verdict;  ///< Y / N, nullopt if none was produced
  std::string final_tape;
  std::size_t new_am_rows = 0;
  std::size_t new_as_rows = 0;
};

/// Codes shared by the brain's fields.
codes::SymbolVector am_input(const Sensory& obs, const std::optional<MotorCommand>& prev);
codes::SymbolVector am_output(const MotorCommand& cmd);
MotorCommand decode_command(const codes::SymbolVector& y);

/// One teacher-forced episode; AM and AS record every new association.
Episode train_episode(Brain& brain, const std::string& input);
/// Runs train_episode over every tape, `episodes` times.
std::vector<Episode> train(Brain& brain, const std::vector<std::string>& tapes, std::size_t episodes = 1);
/// Teacher-only run, no learning.
Episode teacher_episode(const std::string& input, std::size_t max_cycles = 10000);

/// AM drives the real tape. Throws Errc::Stuck when AM has no answer.
Episode exam_real(Brain& brain, const std::string& input);
/// AM drives an imagined tape: AS predicts every sensation after a glance
/// at the initial tape. Throws Errc::ImageryGap when AS cannot predict.
Episode exam_mental(Brain& brain, const std::string& input);

struct CoverageReport {
  bool covered = true;
  std::vector<std::string> missing;
};
/// Whether every AM situation and AS association the teacher would use on
/// `input` is already stored.
CoverageReport coverage(const Brain& brain, const std::string& input);

/// Expected verdict of the parenthesis checker.
Symbol balanced_verdict(const std::string& input);

std::string trace_csv(const Episode& episode);

nlohmann::json to_json(const Brain& brain);
Brain brain_from_json(const nlohmann::json& j);

}  // namespace emachine::robot
