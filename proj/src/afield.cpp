#include "emachine/afield.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <numeric>
#include <set>

namespace emachine::afield {

using codes::Codebook;
using machines::Label;

bool AssociativeProgram::contains(const SymbolVector& x, const SymbolVector& y) const {
  for (std::size_t i = 0; i < gx_.size(); ++i) {
    if (gx_[i] == x && gy_[i] == y) return true;
  }
  return false;
}

void AssociativeProgram::append(const SymbolVector& x, const SymbolVector& y) {
  if (gx_.size() >= capacity_) {
    fail(Errc::MemoryFull, "program full at " + std::to_string(capacity_) + " rows");
  }
  if (!gx_.empty() && (x.size() != gx_.front().size() || y.size() != gy_.front().size())) {
    fail(Errc::Config, "program row dimensions differ from stored rows");
  }
  gx_.push_back(x);
  gy_.push_back(y);
}

void EState::validate() const {
  if (!(tau_e > 1.0)) fail(Errc::Config, "E-state tau_e must exceed 1");
  for (double v : e) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail(Errc::Config, "E-state values must be finite and non-negative");
  }
}

std::vector<double> decode(const SymbolVector& x, const AssociativeProgram& prog, codes::SimilarityKind kind) {
  std::vector<double> s;
  s.reserve(prog.size());
  for (const auto& g : prog.inputs()) s.push_back(codes::similarity(x, g, kind));
  return s;
}

std::vector<double> bias(std::span<const double> s, const EState& estate) {
  if (s.size() != estate.e.size()) fail(Errc::Config, "bias: score and E-state lengths differ");
  std::vector<double> se(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    se[i] = s[i] + estate.bias_add * estate.e[i] + estate.bias_mul * s[i] * estate.e[i];
  }
  return se;
}

std::size_t choose(std::span<const double> se, Rng& rng) {
  if (se.empty()) fail(Errc::NoSelection, "choose: empty score set");
  const double top = *std::max_element(se.begin(), se.end());
  std::vector<std::size_t> maxset;
  for (std::size_t i = 0; i < se.size(); ++i) {
    if (se[i] >= top - codes::kScoreEpsilon) maxset.push_back(i);
  }
  if (maxset.size() == 1) return maxset.front();
  std::uniform_int_distribution<std::size_t> pick(0, maxset.size() - 1);
  return maxset[pick(rng)];
}

std::optional<SymbolVector> encode(std::size_t win, std::span<const double> score, const AssociativeProgram& prog,
                                   double xinh) {
  if (win >= prog.size() || win >= score.size()) fail(Errc::Config, "encode: winner index out of range");
  if (score[win] > xinh) return prog.output(win);
  return std::nullopt;
}

void next_estate(std::span<const double> s, EState& estate) {
  if (s.size() != estate.e.size()) fail(Errc::Config, "next_estate: score and E-state lengths differ");
  const double keep = (estate.tau_e - 1.0) / estate.tau_e;
  for (std::size_t i = 0; i < s.size(); ++i) {
    estate.e[i] = s[i] > estate.e[i] ? s[i] : estate.e[i] * keep;
  }
}

bool learn(const SymbolVector& x, const SymbolVector& y, bool wen, AssociativeProgram& prog, bool dedup) {
  if (!wen) return false;
  if (dedup && prog.contains(x, y)) return false;
  prog.append(x, y);
  return true;
}

AssociativeField::AssociativeField(AfConfig config, AssociativeProgram program, EState estate)
    : config_(config), program_(std::move(program)), estate_(std::move(estate)), rng_(config.seed) {
  if (!(config_.xinh >= 0.0)) fail(Errc::Config, "xinh must be non-negative");
  sync_estate();
  estate_.validate();
}

void AssociativeField::sync_estate() { estate_.e.resize(program_.size(), 0.0); }

void AssociativeField::set_estate(EState estate) {
  estate.validate();
  if (estate.e.size() != program_.size()) fail(Errc::Config, "E-state length differs from program length");
  estate_ = std::move(estate);
}

void AssociativeField::reset() {
  std::fill(estate_.e.begin(), estate_.e.end(), 0.0);
  rng_.seed(config_.seed);
}

void AssociativeField::run(const SymbolVector& x) {
  sync_estate();
  last_ = CycleRecord{};
  last_.s = decode(x, program_, config_.similarity);
  last_.se = config_.estates_enabled ? bias(last_.s, estate_) : last_.s;
  if (!last_.s.empty()) {
    const std::size_t win = choose(last_.se, rng_);
    last_.win = win;
    const auto& guard = config_.guard == EncodeGuard::RawSimilarity ? last_.s : last_.se;
    last_.y = encode(win, guard, program_, config_.xinh);
  }
  if (config_.estates_enabled) next_estate(last_.s, estate_);
}

std::optional<SymbolVector> AssociativeField::cycle(const SymbolVector& x) {
  run(x);
  return last_.y;
}

const SymbolVector& AssociativeField::cycle_forced(const SymbolVector& x, const SymbolVector& forced) {
  run(x);
  last_.y = forced;
  last_.learned = learn(x, forced, true, program_, config_.dedup);
  sync_estate();
  return *last_.y;
}

AssociativeProgram program_from_machine(const machines::CombinatorialMachine& m, const Codebook& in,
                                        const Codebook& out) {
  AssociativeProgram prog;
  for (std::size_t i = 0; i < m.inputs.size(); ++i) {
    prog.append(in.encode(m.inputs[i]), out.encode(m.outputs[m.table[i]]));
  }
  return prog;
}

AssociativeProgram program_from_probabilistic(const machines::ProbabilisticCombinatorialMachine& m,
                                              const Codebook& in, const Codebook& out) {
  AssociativeProgram prog;
  for (std::size_t i = 0; i < m.inputs.size(); ++i) {
    std::int64_t common = 1;
    for (const auto& f : m.delta[i]) {
      if (f.num != 0) common = std::lcm(common, f.den);
    }
    for (std::size_t j = 0; j < m.outputs.size(); ++j) {
      const auto& f = m.delta[i][j];
      const std::int64_t copies = f.num * (common / f.den);
      for (std::int64_t c = 0; c < copies; ++c) prog.append(in.encode(m.inputs[i]), out.encode(m.outputs[j]));
    }
  }
  return prog;
}

AssociativeProgram full_program(const Codebook& in, const Codebook& out) {
  AssociativeProgram prog;
  for (const auto& x : in.vectors()) {
    for (const auto& y : out.vectors()) prog.append(x, y);
  }
  return prog;
}

EState reconfigure(const AssociativeProgram& prog, const machines::CombinatorialMachine& m, const Codebook& in,
                   const Codebook& out) {
  std::set<std::pair<Label, Label>> present;
  std::vector<std::optional<std::pair<Label, Label>>> rows(prog.size());
  for (std::size_t i = 0; i < prog.size(); ++i) {
    auto x = in.decode(prog.input(i));
    auto y = out.decode(prog.output(i));
    if (x && y) {
      rows[i] = std::pair{*x, *y};
      present.insert(*rows[i]);
    }
  }
  std::string missing;
  for (const auto& x : m.inputs) {
    for (const auto& y : m.outputs) {
      if (!present.contains({x, y})) missing += (missing.empty() ? "" : ", ") + ("(" + x + ", " + y + ")");
    }
  }
  if (!missing.empty()) fail(Errc::Coverage, "program lacks pairs: " + missing);

  EState estate;
  estate.tau_e = 1e6;
  estate.bias_add = 0.0;
  estate.bias_mul = 1.0;
  estate.e.assign(prog.size(), 0.0);
  for (std::size_t i = 0; i < prog.size(); ++i) {
    if (rows[i] && m.inputs.contains(rows[i]->first) && m.apply(rows[i]->first) == rows[i]->second) {
      estate.e[i] = 1.0;
    }
  }
  return estate;
}

machines::BlackBox combinatorial_view(AssociativeField& field, const Codebook& in, const Codebook& out) {
  auto initial = std::make_shared<EState>(field.estate());
  machines::BlackBox box;
  box.inputs = machines::Alphabet(in.labels());
  box.reset = [&field, initial] {
    field.reset();
    field.set_estate(*initial);
  };
  box.step = [&field, &in, &out](const Label& x) -> Label {
    auto y = field.cycle(in.encode(x));
    if (!y) return kNullLabel;
    return out.decode(*y).value_or(kNullLabel);
  };
  return box;
}

namespace {

SymbolVector encode_or_null(const Codebook& book, const Label& label) {
  if (label == kNullLabel) return SymbolVector(book.dimension());
  return book.encode(label);
}

}  // namespace

AfMealyView::AfMealyView(AssociativeField& field, FeedbackLayout layout)
    : field_(&field),
      layout_(std::move(layout)),
      loop_([this](const Label& x, const Label& s) { return combinational(x, s); }, layout_.s0) {}

std::pair<Label, Label> AfMealyView::combinational(const Label& x, const Label& s) {
  const auto in = codes::concat(layout_.inputs.encode(x), encode_or_null(layout_.states, s));
  auto y = field_->cycle(in);
  const std::size_t dy = layout_.outputs.dimension();
  const std::size_t ds = layout_.states.dimension();
  if (!y) return {kNullLabel, kNullLabel};
  if (y->size() != dy + ds) fail(Errc::Config, "feedback layout does not match the program's output rows");
  auto out = layout_.outputs.decode(codes::slice(*y, 0, dy)).value_or(kNullLabel);
  auto next = layout_.states.decode(codes::slice(*y, dy, ds)).value_or(kNullLabel);
  return {out, next};
}

void AfMealyView::reset() {
  field_->reset();
  loop_.reset();
}

Label AfMealyView::step(const Label& x) { return loop_.step(x); }

machines::BlackBox AfMealyView::black_box() {
  machines::BlackBox box;
  box.inputs = machines::Alphabet(layout_.inputs.labels());
  box.reset = [this] { reset(); };
  box.step = [this](const Label& x) { return step(x); };
  return box;
}

FeedbackLayout one_hot_layout(const machines::MealyMachine& m) {
  return {Codebook::one_hot(m.inputs.symbols()), Codebook::one_hot(m.states.symbols()),
          Codebook::one_hot(m.outputs.symbols()), m.states[m.s0]};
}

std::size_t demonstrate(AssociativeField& field, const machines::MealyMachine& teacher, const FeedbackLayout& layout,
                        std::uint64_t seed, std::size_t max_cycles) {
  const std::size_t nx = teacher.inputs.size();
  const std::size_t ns = teacher.states.size();
  if (nx == 0) fail(Errc::Config, "teacher has no inputs");

  // Slots reachable from s0; these are the pairs a demonstration can show.
  std::vector<bool> reachable_state(ns, false);
  std::deque<std::size_t> frontier{teacher.s0};
  reachable_state[teacher.s0] = true;
  while (!frontier.empty()) {
    const std::size_t s = frontier.front();
    frontier.pop_front();
    for (std::size_t x = 0; x < nx; ++x) {
      const std::size_t n = teacher.next[teacher.slot(x, s)];
      if (!reachable_state[n]) {
        reachable_state[n] = true;
        frontier.push_back(n);
      }
    }
  }
  std::size_t remaining = 0;
  for (std::size_t s = 0; s < ns; ++s) remaining += reachable_state[s] ? nx : 0;

  std::vector<bool> shown(nx * ns, false);
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, nx - 1);
  std::size_t state = teacher.s0;
  std::size_t cycles = 0;
  field.reset();
  while (remaining > 0) {
    if (cycles >= max_cycles) fail(Errc::Coverage, "demonstration did not cover every reachable (x, s) pair");
    const std::size_t x = pick(rng);
    const std::size_t slot = teacher.slot(x, state);
    const auto in = codes::concat(layout.inputs.encode(teacher.inputs[x]), layout.states.encode(teacher.states[state]));
    const auto out = codes::concat(layout.outputs.encode(teacher.outputs[teacher.omega[slot]]),
                                   layout.states.encode(teacher.states[teacher.next[slot]]));
    field.cycle_forced(in, out);
    if (!shown[slot]) {
      shown[slot] = true;
      --remaining;
    }
    state = teacher.next[slot];
    ++cycles;
  }
  return cycles;
}

nlohmann::json to_json(const AssociativeProgram& prog) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < prog.size(); ++i) rows.push_back({{"x", prog.input(i)}, {"y", prog.output(i)}});
  return {{"rows", rows}};
}

AssociativeProgram program_from_json(const nlohmann::json& j, std::size_t capacity) {
  if (!j.is_object() || !j.contains("rows") || !j.at("rows").is_array()) {
    fail(Errc::Config, "program JSON needs a \"rows\" array");
  }
  AssociativeProgram prog(capacity);
  try {
    for (const auto& row : j.at("rows")) prog.append(row.at("x").get<SymbolVector>(), row.at("y").get<SymbolVector>());
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Config, std::string("program JSON: ") + e.what());
  }
  return prog;
}

nlohmann::json to_json(const EState& estate) { return estate.e; }

EState estate_from_json(const nlohmann::json& j, EState base) {
  if (!j.is_array()) fail(Errc::Config, "E-state JSON must be an array of numbers");
  try {
    base.e = j.get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Config, std::string("E-state JSON: ") + e.what());
  }
  base.validate();
  return base;
}

}  // namespace emachine::afield
