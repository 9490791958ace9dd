#include "emachine/robot.hpp"

#include <algorithm>
#include <sstream>

namespace emachine::robot {

using codes::Codebook;
using codes::SymbolVector;

namespace {

constexpr int kWriteMode = 1;
constexpr int kReadMode = 2;

const Codebook& tape_book() {
  static const Codebook book = Codebook::one_hot(kTapeSymbols);
  return book;
}
const Codebook& utter_book() {
  static const Codebook book = Codebook::one_hot(kUtterSymbols);
  return book;
}
const Codebook& write_book() {
  static const Codebook book = Codebook::one_hot(kWriteSymbols);
  return book;
}
const Codebook& move_book() {
  static const Codebook book = Codebook::one_hot(kMoveSymbols);
  return book;
}
const Codebook& halt_book() {
  static const Codebook book = Codebook::one_hot({"0", "1"});
  return book;
}

SymbolVector position_code(std::size_t p, std::size_t max_cells) {
  if (p >= max_cells) fail(Errc::Config, "tape position " + std::to_string(p) + " exceeds max_cells");
  SymbolVector v(max_cells);
  v[p] = 1;
  return v;
}

std::optional<std::size_t> position_of(const SymbolVector& v) {
  std::optional<std::size_t> p;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == 0) continue;
    if (v[i] != 1 || p) return std::nullopt;
    p = i;
  }
  return p;
}

SymbolVector mode_code(int mode) { return SymbolVector{mode}; }

SymbolVector image_write(std::size_t p, const Symbol& c, std::size_t max_cells) {
  return codes::concat({position_code(p, max_cells), tape_book().encode(c), mode_code(kWriteMode)});
}

SymbolVector image_read(std::size_t p, std::size_t max_cells) {
  return codes::concat({position_code(p, max_cells), SymbolVector(tape_book().dimension()), mode_code(kReadMode)});
}

SymbolVector kinematics_input(std::size_t p, Move m, std::size_t max_cells) {
  return codes::concat(position_code(p, max_cells), move_book().encode(to_symbol(m)));
}

const Symbol& utter_or_none(const std::optional<Symbol>& u) { return u ? *u : kNone; }

afield::AssociativeField make_field(double xinh, std::uint64_t seed, double tau_e, double bias_mul) {
  afield::AfConfig cfg;
  cfg.similarity = codes::SimilarityKind::NonzeroMatchRatio;
  cfg.xinh = xinh;
  cfg.seed = seed;
  cfg.estates_enabled = true;
  cfg.dedup = true;
  afield::EState e;
  e.tau_e = tau_e;
  e.bias_add = 0.0;
  e.bias_mul = bias_mul;
  return afield::AssociativeField(cfg, afield::AssociativeProgram{}, e);
}

void check_tape_input(const std::string& input) {
  for (char ch : input) {
    if (ch == '#' || !std::count(kTapeSymbols.begin(), kTapeSymbols.end(), std::string(1, ch))) {
      fail(Errc::Config, std::string("tape symbol '") + ch + "' is not allowed in an input string");
    }
  }
}

}  // namespace

const char* to_symbol(Move m) noexcept {
  switch (m) {
    case Move::Left: return "L";
    case Move::Right: return "R";
    case Move::Stay: return "S";
  }
  return "S";
}

Move move_from_symbol(const Symbol& s) {
  if (s == "L") return Move::Left;
  if (s == "R") return Move::Right;
  if (s == "S") return Move::Stay;
  fail(Errc::Rejection, "unknown move '" + s + "'");
}

TapeWorld TapeWorld::from_input(const std::string& input) {
  check_tape_input(input);
  TapeWorld w;
  w.cells.push_back(kBoundary);
  for (char ch : input) w.cells.emplace_back(1, ch);
  w.cells.push_back(kBoundary);
  w.position = 1;
  return w;
}

std::string TapeWorld::to_string() const {
  std::string s;
  for (const auto& c : cells) s += c;
  return s;
}

Sensory observe(const TapeWorld& world, const Devices& devices) {
  return {world.cells.at(world.position), devices.last_uttered, world.position};
}

Sensory world_step(TapeWorld& world, Devices& devices, const MotorCommand& cmd) {
  if (cmd.write) world.cells.at(world.position) = *cmd.write;
  if (cmd.move == Move::Left && world.position > 0) --world.position;
  if (cmd.move == Move::Right && world.position + 1 < world.cells.size()) ++world.position;
  devices.last_uttered = utter_or_none(cmd.utter);
  return observe(world, devices);
}

MotorCommand teacher_policy(const Sensory& obs) {
  const Symbol& c = obs.seen;
  if (!std::count(kTapeSymbols.begin(), kTapeSymbols.end(), c)) fail(Errc::TeacherFault, "teacher saw '" + c + "'");
  const Symbol state = obs.uttered_feedback == kNone ? "R" : obs.uttered_feedback;
  auto cmd = [](std::optional<Symbol> w, Move m, Symbol u, bool halt = false) {
    return MotorCommand{std::move(w), m, std::move(u), halt};
  };
  if (state == "R") {
    if (c == ")") return cmd("*", Move::Left, "L");
    if (c == kBoundary) return cmd(std::nullopt, Move::Left, "C");
    return cmd(std::nullopt, Move::Right, "R");
  }
  if (state == "L") {
    if (c == "(") return cmd("*", Move::Right, "R");
    if (c == kBoundary) return cmd("N", Move::Stay, "N", true);
    return cmd(std::nullopt, Move::Left, "L");
  }
  if (state == "C") {
    if (c == "(") return cmd(std::nullopt, Move::Left, "F");
    if (c == kBoundary) return cmd("Y", Move::Stay, "Y", true);
    return cmd(std::nullopt, Move::Left, "C");
  }
  if (state == "F") {
    if (c == kBoundary) return cmd("N", Move::Stay, "N", true);
    return cmd(std::nullopt, Move::Left, "F");
  }
  fail(Errc::TeacherFault, "teacher has no state '" + state + "'");
}

Brain::Brain(BrainConfig cfg)
    : config(cfg),
      am(make_field(cfg.exact_xinh, derive_seed(cfg.seed, 0), 10.0, 0.0)),
      kinematics(make_field(cfg.exact_xinh, derive_seed(cfg.seed, 1), 10.0, 0.0)),
      speech(make_field(cfg.exact_xinh, derive_seed(cfg.seed, 2), 10.0, 0.0)),
      image(make_field(cfg.image_xinh, derive_seed(cfg.seed, 3), cfg.image_tau_e, 1.0)) {
  if (cfg.max_cells < 2) fail(Errc::Config, "max_cells must be at least 2");
  if (cfg.max_cycles == 0) fail(Errc::Config, "max_cycles must be positive");
}

void Brain::reset() {
  am.reset();
  kinematics.reset();
  speech.reset();
  image.reset();
}

SymbolVector am_input(const Sensory& obs, const std::optional<MotorCommand>& prev) {
  const Symbol& w = prev ? utter_or_none(prev->write) : kNone;
  const Symbol m = prev ? to_symbol(prev->move) : kNone;
  const Symbol& u = prev ? utter_or_none(prev->utter) : kNone;
  return codes::concat({tape_book().encode(obs.seen), utter_book().encode(obs.uttered_feedback),
                        write_book().encode(w), move_book().encode(m), utter_book().encode(u)});
}

SymbolVector am_output(const MotorCommand& cmd) {
  return codes::concat({write_book().encode(utter_or_none(cmd.write)), move_book().encode(to_symbol(cmd.move)),
                        utter_book().encode(utter_or_none(cmd.utter)), halt_book().encode(cmd.halt ? "1" : "0")});
}

MotorCommand decode_command(const SymbolVector& y) {
  std::size_t off = 0;
  auto field = [&](const Codebook& book) {
    auto label = book.decode(codes::slice(y, off, book.dimension()));
    off += book.dimension();
    if (!label) fail(Errc::Config, "motor output " + y.to_string() + " is not a valid command code");
    return *label;
  };
  MotorCommand cmd;
  const auto w = field(write_book());
  const auto m = field(move_book());
  const auto u = field(utter_book());
  const auto h = field(halt_book());
  if (w != kNone) cmd.write = w;
  if (m == kNone) fail(Errc::Config, "motor output has no move");
  cmd.move = move_from_symbol(m);
  if (u != kNone) cmd.utter = u;
  cmd.halt = h == "1";
  return cmd;
}

namespace {

std::size_t count_learned(const afield::AssociativeField& f) { return f.last().learned ? 1 : 0; }

Symbol tape_verdict(const TapeWorld& world) {
  const auto& c = world.cells.front();
  return c;
}

std::optional<Symbol> as_verdict(const Symbol& s) {
  if (s == "Y" || s == "N") return s;
  return std::nullopt;
}

}  // namespace

Episode train_episode(Brain& brain, const std::string& input) {
  const std::size_t cells = brain.config.max_cells;
  TapeWorld world = TapeWorld::from_input(input);
  if (world.cells.size() > cells) fail(Errc::Config, "tape longer than the brain's max_cells");
  Devices devices;
  Episode ep;
  brain.reset();
  // The same glance over the initial tape that starts a mental exam.
  for (std::size_t p = 0; p < world.cells.size(); ++p) {
    brain.image.cycle_forced(image_write(p, world.cells[p], cells), tape_book().encode(world.cells[p]));
    ep.new_as_rows += count_learned(brain.image);
  }
  Sensory obs = observe(world, devices);
  std::optional<MotorCommand> prev;
  for (std::size_t cycle = 0;; ++cycle) {
    if (cycle >= brain.config.max_cycles) fail(Errc::Stuck, "teacher did not halt");
    const MotorCommand cmd = teacher_policy(obs);
    brain.am.cycle_forced(am_input(obs, prev), am_output(cmd));
    ep.new_am_rows += count_learned(brain.am);
    ep.trace.push_back({cycle, obs, cmd, Source::Teacher, SensorySource::World});
    if (cmd.write) {
      brain.image.cycle_forced(image_write(obs.position, *cmd.write, cells), tape_book().encode(*cmd.write));
      ep.new_as_rows += count_learned(brain.image);
    }
    const Sensory next = world_step(world, devices, cmd);
    if (cmd.halt) break;
    brain.kinematics.cycle_forced(kinematics_input(obs.position, cmd.move, cells), position_code(next.position, cells));
    ep.new_as_rows += count_learned(brain.kinematics);
    brain.speech.cycle_forced(utter_book().encode(utter_or_none(cmd.utter)), utter_book().encode(next.uttered_feedback));
    ep.new_as_rows += count_learned(brain.speech);
    brain.image.cycle_forced(image_write(next.position, next.seen, cells), tape_book().encode(next.seen));
    ep.new_as_rows += count_learned(brain.image);
    prev = cmd;
    obs = next;
  }
  ep.verdict = as_verdict(tape_verdict(world));
  ep.final_tape = world.to_string();
  return ep;
}

std::vector<Episode> train(Brain& brain, const std::vector<std::string>& tapes, std::size_t episodes) {
  std::vector<Episode> out;
  for (std::size_t k = 0; k < episodes; ++k) {
    for (const auto& t : tapes) out.push_back(train_episode(brain, t));
  }
  return out;
}

Episode teacher_episode(const std::string& input, std::size_t max_cycles) {
  TapeWorld world = TapeWorld::from_input(input);
  Devices devices;
  Episode ep;
  Sensory obs = observe(world, devices);
  for (std::size_t cycle = 0;; ++cycle) {
    if (cycle >= max_cycles) fail(Errc::Stuck, "teacher did not halt");
    const MotorCommand cmd = teacher_policy(obs);
    ep.trace.push_back({cycle, obs, cmd, Source::Teacher, SensorySource::World});
    obs = world_step(world, devices, cmd);
    if (cmd.halt) break;
  }
  ep.verdict = as_verdict(tape_verdict(world));
  ep.final_tape = world.to_string();
  return ep;
}

namespace {

MotorCommand am_command(Brain& brain, const Sensory& obs, const std::optional<MotorCommand>& prev,
                        std::size_t cycle) {
  const auto x = am_input(obs, prev);
  auto y = brain.am.cycle(x);
  if (!y) {
    fail(Errc::Stuck, "AM has no command at cycle " + std::to_string(cycle) + " for input " + x.to_string());
  }
  return decode_command(*y);
}

// Presents a write to the image field; the stored row must match exactly.
void imagine_write(Brain& brain, std::size_t p, const Symbol& c) {
  const auto x = image_write(p, c, brain.config.max_cells);
  auto y = brain.image.cycle(x);
  const auto& rec = brain.image.last();
  if (!y || !rec.win || rec.s[*rec.win] < 1.0 - codes::kScoreEpsilon || *y != tape_book().encode(c)) {
    fail(Errc::ImageryGap, "no image of '" + c + "' at cell " + std::to_string(p));
  }
}

Symbol imagine_read(Brain& brain, std::size_t p) {
  auto y = brain.image.cycle(image_read(p, brain.config.max_cells));
  auto label = y ? tape_book().decode(*y) : std::nullopt;
  if (!label) fail(Errc::ImageryGap, "cannot imagine the contents of cell " + std::to_string(p));
  return *label;
}

}  // namespace

Episode exam_real(Brain& brain, const std::string& input) {
  TapeWorld world = TapeWorld::from_input(input);
  if (world.cells.size() > brain.config.max_cells) fail(Errc::Config, "tape longer than the brain's max_cells");
  Devices devices;
  Episode ep;
  brain.reset();
  Sensory obs = observe(world, devices);
  std::optional<MotorCommand> prev;
  for (std::size_t cycle = 0;; ++cycle) {
    if (cycle >= brain.config.max_cycles) fail(Errc::Stuck, "AM did not halt");
    const MotorCommand cmd = am_command(brain, obs, prev, cycle);
    ep.trace.push_back({cycle, obs, cmd, Source::Am, SensorySource::World});
    obs = world_step(world, devices, cmd);
    if (cmd.halt) break;
    prev = cmd;
  }
  ep.verdict = as_verdict(tape_verdict(world));
  ep.final_tape = world.to_string();
  return ep;
}

Episode exam_mental(Brain& brain, const std::string& input) {
  const std::size_t cells = brain.config.max_cells;
  // The only look at the real tape: the glance that forms its image.
  TapeWorld shown = TapeWorld::from_input(input);
  if (shown.cells.size() > cells) fail(Errc::Config, "tape longer than the brain's max_cells");
  Episode ep;
  brain.reset();
  for (std::size_t p = 0; p < shown.cells.size(); ++p) imagine_write(brain, p, shown.cells[p]);

  Sensory obs{imagine_read(brain, shown.position), kNone, shown.position};
  std::optional<MotorCommand> prev;
  for (std::size_t cycle = 0;; ++cycle) {
    if (cycle >= brain.config.max_cycles) fail(Errc::Stuck, "AM did not halt");
    const MotorCommand cmd = am_command(brain, obs, prev, cycle);
    ep.trace.push_back({cycle, obs, cmd, Source::Am, SensorySource::Imagery});
    if (cmd.write) {
      imagine_write(brain, obs.position, *cmd.write);
      shown.cells.at(obs.position) = *cmd.write;
    }
    if (cmd.halt) {
      ep.verdict = cmd.utter ? as_verdict(*cmd.utter) : std::nullopt;
      break;
    }
    auto p = brain.kinematics.cycle(kinematics_input(obs.position, cmd.move, cells));
    auto pos = p ? position_of(*p) : std::nullopt;
    if (!pos) fail(Errc::ImageryGap, "cannot imagine where move " + std::string(to_symbol(cmd.move)) + " leads");
    auto u = brain.speech.cycle(utter_book().encode(utter_or_none(cmd.utter)));
    auto uttered = u ? utter_book().decode(*u) : std::nullopt;
    if (!uttered) fail(Errc::ImageryGap, "cannot imagine hearing '" + utter_or_none(cmd.utter) + "'");
    obs = Sensory{imagine_read(brain, *pos), *uttered, *pos};
    prev = cmd;
  }
  ep.final_tape = shown.to_string();
  return ep;
}

CoverageReport coverage(const Brain& brain, const std::string& input) {
  const std::size_t cells = brain.config.max_cells;
  CoverageReport r;
  TapeWorld world = TapeWorld::from_input(input);
  if (world.cells.size() > cells) {
    r.covered = false;
    r.missing.push_back("tape longer than max_cells");
    return r;
  }
  auto need = [&r](const afield::AssociativeField& f, const SymbolVector& x, const SymbolVector& y,
                   const std::string& what) {
    if (!f.program().contains(x, y)) {
      r.covered = false;
      r.missing.push_back(what);
    }
  };
  for (std::size_t p = 0; p < world.cells.size(); ++p) {
    need(brain.image, image_write(p, world.cells[p], cells), tape_book().encode(world.cells[p]),
         "image of '" + world.cells[p] + "' at " + std::to_string(p));
  }
  const Episode ep = teacher_episode(input, brain.config.max_cycles);
  for (std::size_t k = 0; k < ep.trace.size(); ++k) {
    const auto& row = ep.trace[k];
    const auto prev = k ? std::optional<MotorCommand>(ep.trace[k - 1].command) : std::nullopt;
    const std::string at = " at cycle " + std::to_string(k);
    need(brain.am, am_input(row.sensory, prev), am_output(row.command), "AM situation" + at);
    if (row.command.write) {
      need(brain.image, image_write(row.sensory.position, *row.command.write, cells),
           tape_book().encode(*row.command.write), "image write" + at);
    }
    if (row.command.halt) break;
    const auto& next = ep.trace.at(k + 1).sensory;
    need(brain.kinematics, kinematics_input(row.sensory.position, row.command.move, cells),
         position_code(next.position, cells), "kinematics" + at);
    need(brain.speech, utter_book().encode(utter_or_none(row.command.utter)),
         utter_book().encode(next.uttered_feedback), "speech" + at);
  }
  return r;
}

Symbol balanced_verdict(const std::string& input) {
  long depth = 0;
  for (char ch : input) {
    if (ch == '(') ++depth;
    if (ch == ')' && --depth < 0) return "N";
  }
  return depth == 0 ? "Y" : "N";
}

std::string trace_csv(const Episode& episode) {
  std::ostringstream os;
  os << "cycle,seen,uttered_fb,cmd_write,cmd_move,cmd_utter,source,sensory_source\n";
  for (const auto& r : episode.trace) {
    os << r.cycle << ',' << r.sensory.seen << ',' << r.sensory.uttered_feedback << ','
       << utter_or_none(r.command.write) << ',' << to_symbol(r.command.move) << ',' << utter_or_none(r.command.utter)
       << ',' << (r.source == Source::Teacher ? "teacher" : "AM") << ','
       << (r.sensory_source == SensorySource::World ? "world" : "AS") << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const Brain& brain) {
  const auto& c = brain.config;
  return {{"config",
           {{"max_cells", c.max_cells},
            {"seed", c.seed},
            {"image_tau_e", c.image_tau_e},
            {"image_xinh", c.image_xinh},
            {"exact_xinh", c.exact_xinh},
            {"max_cycles", c.max_cycles}}},
          {"am", afield::to_json(brain.am.program())},
          {"kinematics", afield::to_json(brain.kinematics.program())},
          {"speech", afield::to_json(brain.speech.program())},
          {"image", afield::to_json(brain.image.program())}};
}

Brain brain_from_json(const nlohmann::json& j) {
  BrainConfig c;
  try {
    const auto& jc = j.at("config");
    c.max_cells = jc.at("max_cells").get<std::size_t>();
    c.seed = jc.at("seed").get<std::uint64_t>();
    c.image_tau_e = jc.value("image_tau_e", c.image_tau_e);
    c.image_xinh = jc.value("image_xinh", c.image_xinh);
    c.exact_xinh = jc.value("exact_xinh", c.exact_xinh);
    c.max_cycles = jc.value("max_cycles", c.max_cycles);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Config, std::string("brain JSON: ") + e.what());
  }
  Brain b(c);
  auto load = [&j](const char* key, afield::AssociativeField& f) {
    if (!j.contains(key)) fail(Errc::Config, std::string("brain JSON lacks \"") + key + "\"");
    f.program() = afield::program_from_json(j.at(key));
  };
  load("am", b.am);
  load("kinematics", b.kinematics);
  load("speech", b.speech);
  load("image", b.image);
  b.reset();
  return b;
}

}  // namespace emachine::robot
