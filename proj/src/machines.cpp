#include "emachine/machines.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

namespace emachine::machines {

namespace {

constexpr char kPairSeparator = '|';

std::vector<Label> labels_from_json(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    fail(Errc::Config, std::string("machine JSON: missing array '") + key + "'");
  }
  std::vector<Label> out;
  for (const auto& e : j.at(key)) {
    if (!e.is_string()) fail(Errc::Config, std::string("machine JSON: '") + key + "' must hold strings");
    out.push_back(e.get<Label>());
  }
  return out;
}

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

std::size_t draw_output(const std::vector<Fraction>& row, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t y = 0; y < row.size(); ++y) {
    acc += row[y].value();
    if (u < acc) return y;
  }
  // Rounding at the top of the cumulative sum: last output with non-zero mass.
  for (std::size_t y = row.size(); y-- > 0;) {
    if (row[y].num > 0) return y;
  }
  return row.size() - 1;
}

}  // namespace

Label pair_label(const Label& a, const Label& b) { return a + kPairSeparator + b; }

std::optional<std::pair<Label, Label>> split_pair_label(const Label& label) {
  const auto pos = label.find(kPairSeparator);
  if (pos == Label::npos || label.find(kPairSeparator, pos + 1) != Label::npos) return std::nullopt;
  return std::make_pair(label.substr(0, pos), label.substr(pos + 1));
}

Alphabet::Alphabet(std::vector<Label> symbols) : symbols_(std::move(symbols)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (!index_.emplace(symbols_[i], i).second) {
      fail(Errc::Config, "alphabet: duplicate symbol '" + symbols_[i] + "'");
    }
  }
}

std::optional<std::size_t> Alphabet::find(const Label& s) const {
  auto it = index_.find(s);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Alphabet::index_of(const Label& s, const char* what) const {
  auto i = find(s);
  if (!i) fail(Errc::Rejection, std::string(what) + " '" + s + "' is not in the alphabet");
  return *i;
}

bool Alphabet::same_set(const Alphabet& other) const {
  if (size() != other.size()) return false;
  return std::all_of(symbols_.begin(), symbols_.end(), [&](const Label& s) { return other.contains(s); });
}

CombinatorialMachine::CombinatorialMachine(Alphabet x, Alphabet y, std::vector<std::size_t> f)
    : inputs(std::move(x)), outputs(std::move(y)), table(std::move(f)) {
  if (table.size() != inputs.size()) fail(Errc::Config, "combinatorial machine: f must be total on X");
  for (auto v : table) {
    if (v >= outputs.size()) fail(Errc::Config, "combinatorial machine: output index out of range");
  }
}

CombinatorialMachine CombinatorialMachine::from_pairs(Alphabet x, Alphabet y,
                                                      const std::vector<std::pair<Label, Label>>& rows) {
  std::vector<std::optional<std::size_t>> f(x.size());
  for (const auto& [a, b] : rows) {
    const auto xi = x.find(a);
    const auto yi = y.find(b);
    if (!xi || !yi) fail(Errc::Config, "combinatorial machine: row (" + a + ", " + b + ") outside alphabets");
    if (f[*xi]) fail(Errc::Config, "combinatorial machine: input '" + a + "' listed twice");
    f[*xi] = *yi;
  }
  std::vector<std::size_t> table;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!f[i]) fail(Errc::Config, "combinatorial machine: f undefined on '" + x[i] + "'");
    table.push_back(*f[i]);
  }
  return CombinatorialMachine(std::move(x), std::move(y), std::move(table));
}

const Label& CombinatorialMachine::apply(const Label& x) const {
  return outputs[table[inputs.index_of(x, "input")]];
}

ProbabilisticCombinatorialMachine::ProbabilisticCombinatorialMachine(Alphabet x, Alphabet y,
                                                                     std::vector<std::vector<Fraction>> d)
    : inputs(std::move(x)), outputs(std::move(y)), delta(std::move(d)) {
  if (delta.size() != inputs.size()) fail(Errc::Config, "probabilistic machine: delta needs one row per input");
  for (std::size_t xi = 0; xi < delta.size(); ++xi) {
    const auto& row = delta[xi];
    if (row.size() != outputs.size()) fail(Errc::Config, "probabilistic machine: ragged delta row");
    double sum = 0.0;
    for (const auto& f : row) {
      if (f.den <= 0 || f.num < 0 || f.num > f.den) {
        fail(Errc::Config, "probabilistic machine: malformed probability in row '" + inputs[xi] + "'");
      }
      sum += f.value();
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      fail(Errc::Config, "probabilistic machine: delta row '" + inputs[xi] + "' does not sum to 1");
    }
  }
}

double ProbabilisticCombinatorialMachine::probability(const Label& x, const Label& y) const {
  return delta[inputs.index_of(x, "input")][outputs.index_of(y, "output")].value();
}

MealyMachine::MealyMachine(Alphabet x, Alphabet y, Alphabet s, std::size_t initial,
                           std::vector<std::size_t> out, std::vector<std::size_t> nxt)
    : inputs(std::move(x)),
      outputs(std::move(y)),
      states(std::move(s)),
      s0(initial),
      omega(std::move(out)),
      next(std::move(nxt)) {
  const std::size_t cells = inputs.size() * states.size();
  if (states.size() == 0 || s0 >= states.size()) fail(Errc::Config, "mealy machine: invalid initial state");
  if (omega.size() != cells || next.size() != cells) {
    fail(Errc::Config, "mealy machine: omega and next must be total on X x S");
  }
  for (std::size_t i = 0; i < cells; ++i) {
    if (omega[i] >= outputs.size() || next[i] >= states.size()) {
      fail(Errc::Config, "mealy machine: table entry out of range");
    }
  }
}

std::vector<Label> run_combinatorial(const CombinatorialMachine& m, std::span<const Label> xs) {
  std::vector<Label> ys;
  ys.reserve(xs.size());
  for (const auto& x : xs) ys.push_back(m.apply(x));
  return ys;
}

std::vector<Label> run_mealy(const MealyMachine& m, std::span<const Label> xs) {
  std::vector<Label> ys;
  ys.reserve(xs.size());
  std::size_t s = m.s0;
  for (const auto& x : xs) {
    const auto slot = m.slot(m.inputs.index_of(x, "input"), s);
    ys.push_back(m.outputs[m.omega[slot]]);
    s = m.next[slot];
  }
  return ys;
}

std::vector<Label> sample_probabilistic(const ProbabilisticCombinatorialMachine& m,
                                        std::span<const Label> xs, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Label> ys;
  ys.reserve(xs.size());
  for (const auto& x : xs) {
    ys.push_back(m.outputs[draw_output(m.delta[m.inputs.index_of(x, "input")], rng)]);
  }
  return ys;
}

MealyMachine wrap_delayed_feedback(const CombinatorialMachine& m, const Label& s0) {
  std::vector<Label> ext_in, ext_out, fb;
  auto add_unique = [](std::vector<Label>& v, const Label& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& label : m.inputs) {
    auto parts = split_pair_label(label);
    if (!parts) fail(Errc::Config, "delayed feedback: input '" + label + "' is not an (x|s) pair");
    add_unique(ext_in, parts->first);
    add_unique(fb, parts->second);
  }
  if (ext_in.size() * fb.size() != m.inputs.size()) {
    fail(Errc::Config, "delayed feedback: input alphabet is not the product X_ext x S");
  }
  std::set<Label> fb_set(fb.begin(), fb.end());
  if (!fb_set.contains(s0)) fail(Errc::Config, "delayed feedback: initial state '" + s0 + "' not in S");
  for (const auto& label : m.outputs) {
    auto parts = split_pair_label(label);
    if (!parts) fail(Errc::Config, "delayed feedback: output '" + label + "' is not a (y|s) pair");
    if (!fb_set.contains(parts->second)) {
      fail(Errc::Config, "delayed feedback: output '" + label + "' feeds back a state outside S");
    }
    add_unique(ext_out, parts->first);
  }

  Alphabet xa(ext_in), ya(ext_out), sa(fb);
  std::vector<std::size_t> omega(xa.size() * sa.size()), next(xa.size() * sa.size());
  for (std::size_t xi = 0; xi < xa.size(); ++xi) {
    for (std::size_t si = 0; si < sa.size(); ++si) {
      const auto out = split_pair_label(m.apply(pair_label(xa[xi], sa[si])));
      omega[xi * sa.size() + si] = ya.index_of(out->first);
      next[xi * sa.size() + si] = sa.index_of(out->second);
    }
  }
  const auto initial = sa.index_of(s0);
  return MealyMachine(std::move(xa), std::move(ya), std::move(sa), initial, std::move(omega), std::move(next));
}

Label DelayedFeedbackLoop::step(const Label& x) {
  auto [y, s_next] = step_(x, s_);
  s_ = std::move(s_next);
  return y;
}

BlackBox black_box(const CombinatorialMachine& m) {
  return {m.inputs, m.outputs, [] {}, [&m](const Label& x) { return m.apply(x); }};
}

BlackBox black_box(const MealyMachine& m) {
  auto state = std::make_shared<std::size_t>(m.s0);
  return {m.inputs, m.outputs, [state, &m] { *state = m.s0; },
          [state, &m](const Label& x) {
            const auto slot = m.slot(m.inputs.index_of(x, "input"), *state);
            *state = m.next[slot];
            return m.outputs[m.omega[slot]];
          }};
}

BlackBox black_box(const ProbabilisticCombinatorialMachine& m, std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return {m.inputs, m.outputs, [] {},
          [rng, &m](const Label& x) { return m.outputs[draw_output(m.delta[m.inputs.index_of(x, "input")], *rng)]; }};
}

namespace {

void check_alphabets(const BlackBox& a, const BlackBox& b) {
  if (!a.inputs.same_set(b.inputs)) fail(Errc::Config, "equivalence: input alphabets differ");
  if (a.outputs.size() && b.outputs.size() && !a.outputs.same_set(b.outputs)) {
    fail(Errc::Config, "equivalence: output alphabets differ");
  }
}

void reset(const BlackBox& m) {
  if (m.reset) m.reset();
}

// Odometer increment over base-k digits; false once every sequence was visited.
bool next_sequence(std::vector<std::size_t>& digits, std::size_t k) {
  for (std::size_t pos = digits.size(); pos-- > 0;) {
    if (++digits[pos] < k) return true;
    digits[pos] = 0;
  }
  return false;
}

}  // namespace

EquivalenceVerdict equivalent(const BlackBox& a, const BlackBox& b, ExhaustiveProbe) {
  check_alphabets(a, b);
  EquivalenceVerdict v;
  for (const auto& x : a.inputs) {
    reset(a);
    reset(b);
    const auto ya = a.step(x);
    const auto yb = b.step(x);
    if (ya != yb) {
      v.equivalent = false;
      v.witness = {x};
      v.outputs_a = {ya};
      v.outputs_b = {yb};
      v.detail = "outputs differ on input '" + x + "': '" + ya + "' vs '" + yb + "'";
      return v;
    }
  }
  return v;
}

EquivalenceVerdict equivalent(const BlackBox& a, const BlackBox& b, DepthProbe probe) {
  check_alphabets(a, b);
  EquivalenceVerdict v;
  const std::size_t k = a.inputs.size();
  if (k == 0 || probe.depth == 0) return v;
  std::vector<std::size_t> digits(probe.depth, 0);
  std::vector<Label> seq(probe.depth);
  while (true) {
    for (std::size_t i = 0; i < probe.depth; ++i) seq[i] = a.inputs[digits[i]];
    reset(a);
    reset(b);
    std::vector<Label> oa, ob;
    for (std::size_t i = 0; i < probe.depth; ++i) {
      // Only compare up to the current best witness length; longer ones cannot improve it.
      if (!v.equivalent && i + 1 >= v.witness.size()) break;
      oa.push_back(a.step(seq[i]));
      ob.push_back(b.step(seq[i]));
      if (oa.back() != ob.back()) {
        v.equivalent = false;
        v.witness.assign(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(i + 1));
        v.outputs_a = oa;
        v.outputs_b = ob;
        break;
      }
    }
    if (!v.equivalent && v.witness.size() == 1) break;
    if (!next_sequence(digits, k)) break;
  }
  if (!v.equivalent) {
    std::ostringstream d;
    d << "outputs differ after " << v.witness.size() << " inputs:";
    for (const auto& x : v.witness) d << ' ' << x;
    v.detail = d.str();
  }
  return v;
}

EquivalenceVerdict equivalent(const BlackBox& sampler, const ProbabilisticCombinatorialMachine& reference,
                              MonteCarloProbe probe) {
  if (!sampler.inputs.same_set(reference.inputs)) fail(Errc::Config, "equivalence: input alphabets differ");
  if (probe.samples == 0) fail(Errc::Config, "equivalence: Monte Carlo probe needs samples > 0");
  EquivalenceVerdict v;
  const double n = double(probe.samples);
  for (std::size_t xi = 0; xi < reference.inputs.size(); ++xi) {
    const auto& x = reference.inputs[xi];
    std::map<Label, std::size_t> counts;
    reset(sampler);
    for (std::size_t i = 0; i < probe.samples; ++i) ++counts[sampler.step(x)];
    for (const auto& [y, c] : counts) {
      if (!reference.outputs.contains(y)) {
        v.equivalent = false;
        v.witness = {x};
        v.detail = "input '" + x + "' produced '" + y + "', which has probability 0";
        return v;
      }
    }
    for (std::size_t yi = 0; yi < reference.outputs.size(); ++yi) {
      const auto& y = reference.outputs[yi];
      const double p = reference.delta[xi][yi].value();
      const double freq = counts.contains(y) ? double(counts[y]) / n : 0.0;
      const double sigma = std::sqrt(p * (1.0 - p) / n);
      if (std::abs(freq - p) > probe.k * sigma + 1e-12) {
        v.equivalent = false;
        v.witness = {x};
        std::ostringstream d;
        d << "P(" << y << " | " << x << ") observed " << freq << ", expected " << p << " +- " << probe.k * sigma;
        v.detail = d.str();
        return v;
      }
    }
  }
  return v;
}

CombinatorialMachine combinatorial_from_json(const nlohmann::json& j) {
  Alphabet x(labels_from_json(j, "alphabet_x"));
  Alphabet y(labels_from_json(j, "alphabet_y"));
  if (!j.contains("table") || !j.at("table").is_array()) fail(Errc::Config, "machine JSON: missing 'table'");
  std::vector<std::pair<Label, Label>> rows;
  for (const auto& r : j.at("table")) {
    if (!r.is_array() || r.size() != 2 || !r[0].is_string() || !r[1].is_string()) {
      fail(Errc::Config, "machine JSON: combinatorial rows are [\"x\",\"y\"]");
    }
    rows.emplace_back(r[0].get<Label>(), r[1].get<Label>());
  }
  return CombinatorialMachine::from_pairs(std::move(x), std::move(y), rows);
}

MealyMachine mealy_from_json(const nlohmann::json& j) {
  Alphabet x(labels_from_json(j, "alphabet_x"));
  Alphabet y(labels_from_json(j, "alphabet_y"));
  Alphabet s(labels_from_json(j, "states"));
  if (!j.contains("s0") || !j.at("s0").is_string()) fail(Errc::Config, "machine JSON: missing 's0'");
  if (!j.contains("table") || !j.at("table").is_array()) fail(Errc::Config, "machine JSON: missing 'table'");
  const std::size_t cells = x.size() * s.size();
  std::vector<std::optional<std::size_t>> omega(cells), next(cells);
  for (const auto& r : j.at("table")) {
    if (!r.is_array() || r.size() != 4) fail(Errc::Config, "machine JSON: mealy rows are [x, s, y, s_next]");
    for (const auto& e : r) {
      if (!e.is_string()) fail(Errc::Config, "machine JSON: mealy row entries must be strings");
    }
    const auto xi = x.find(r[0].get<Label>());
    const auto si = s.find(r[1].get<Label>());
    const auto yi = y.find(r[2].get<Label>());
    const auto ni = s.find(r[3].get<Label>());
    if (!xi || !si || !yi || !ni) fail(Errc::Config, "machine JSON: mealy row outside alphabets");
    const auto slot = *xi * s.size() + *si;
    if (omega[slot]) fail(Errc::Config, "machine JSON: duplicate mealy row");
    omega[slot] = *yi;
    next[slot] = *ni;
  }
  std::vector<std::size_t> o, n;
  for (std::size_t i = 0; i < cells; ++i) {
    if (!omega[i]) fail(Errc::Config, "machine JSON: mealy table is not total on X x S");
    o.push_back(*omega[i]);
    n.push_back(*next[i]);
  }
  const auto s0 = s.find(j.at("s0").get<Label>());
  if (!s0) fail(Errc::Config, "machine JSON: s0 not in states");
  return MealyMachine(std::move(x), std::move(y), std::move(s), *s0, std::move(o), std::move(n));
}

ProbabilisticCombinatorialMachine probabilistic_from_json(const nlohmann::json& j) {
  Alphabet x(labels_from_json(j, "alphabet_x"));
  Alphabet y(labels_from_json(j, "alphabet_y"));
  if (!j.contains("delta") || !j.at("delta").is_array()) fail(Errc::Config, "machine JSON: missing 'delta'");
  std::vector<std::vector<Fraction>> delta(x.size(), std::vector<Fraction>(y.size()));
  for (const auto& r : j.at("delta")) {
    if (!r.is_array() || r.size() != 4 || !r[0].is_string() || !r[1].is_string() ||
        !r[2].is_number_integer() || !r[3].is_number_integer()) {
      fail(Errc::Config, "machine JSON: delta rows are [\"x\",\"y\",num,den]");
    }
    const auto xi = x.find(r[0].get<Label>());
    const auto yi = y.find(r[1].get<Label>());
    if (!xi || !yi) fail(Errc::Config, "machine JSON: delta row outside alphabets");
    delta[*xi][*yi] = Fraction{r[2].get<std::int64_t>(), r[3].get<std::int64_t>()};
  }
  return ProbabilisticCombinatorialMachine(std::move(x), std::move(y), std::move(delta));
}

nlohmann::json to_json(const CombinatorialMachine& m) {
  nlohmann::json j;
  j["alphabet_x"] = m.inputs.symbols();
  j["alphabet_y"] = m.outputs.symbols();
  j["table"] = nlohmann::json::array();
  for (std::size_t i = 0; i < m.inputs.size(); ++i) j["table"].push_back({m.inputs[i], m.outputs[m.table[i]]});
  return j;
}

nlohmann::json to_json(const MealyMachine& m) {
  nlohmann::json j;
  j["alphabet_x"] = m.inputs.symbols();
  j["alphabet_y"] = m.outputs.symbols();
  j["states"] = m.states.symbols();
  j["s0"] = m.states[m.s0];
  j["table"] = nlohmann::json::array();
  for (std::size_t x = 0; x < m.inputs.size(); ++x) {
    for (std::size_t s = 0; s < m.states.size(); ++s) {
      const auto slot = m.slot(x, s);
      j["table"].push_back({m.inputs[x], m.states[s], m.outputs[m.omega[slot]], m.states[m.next[slot]]});
    }
  }
  return j;
}

}  // namespace emachine::machines
