// Command-line front end: loads a JSON config, runs one experiment, and
// writes its CSV trace and JSON summary once the run has succeeded.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emachine/acceptance.hpp"
#include "emachine/afield.hpp"
#include "emachine/ann0.hpp"
#include "emachine/codes.hpp"
#include "emachine/epmm.hpp"
#include "emachine/machines.hpp"
#include "emachine/pmm.hpp"
#include "emachine/robot.hpp"
#include "emachine/trace.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace emachine;

namespace {

constexpr std::uint64_t kVerifySeed = 1;

struct Options {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out_dir = ".";
  bool verbose = false;
};

/// Files produced by a command, written only after it finishes.
struct Artifacts {
  std::vector<std::pair<std::string, std::string>> files;

  void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
  void add_json(std::string name, const json& j) { add(std::move(name), j.dump(2) + "\n"); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Config, "cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(Errc::Config, origin + ": " + e.what());
  }
}

/// Reads --config. A "kind" field, when present, must name this command.
json load_config(const Options& opt, const std::string& kind, bool required = true) {
  if (opt.config_path.empty()) {
    if (required) fail(Errc::Config, "this command needs --config");
    return json::object();
  }
  auto j = parse_json(read_file(opt.config_path), opt.config_path);
  if (!j.is_object()) fail(Errc::Config, "config: top level must be an object");
  if (j.contains("kind") && j["kind"] != kind) {
    fail(Errc::Config, "config/kind: expected \"" + kind + "\", got " + j["kind"].dump());
  }
  return j;
}

std::uint64_t resolve_seed(const Options& opt, const json& cfg) {
  if (opt.seed) return *opt.seed;
  if (cfg.contains("seed")) {
    try {
      return cfg.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
      fail(Errc::Config, std::string("config/seed: ") + e.what());
    }
  }
  fail(Errc::Config, "no seed: pass --seed or set \"seed\" in the config");
}

const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) fail(Errc::Config, "config" + path + "/" + key + ": missing");
  return j.at(key);
}

template <class T>
T need_as(const json& j, const std::string& key, const std::string& path = "") {
  const auto& v = need(j, key, path);
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    fail(Errc::Config, "config" + path + "/" + key + ": " + e.what());
  }
}

template <class T>
T opt_as(const json& j, const std::string& key, T fallback, const std::string& path = "") {
  if (!j.contains(key)) return fallback;
  return need_as<T>(j, key, path);
}

/// Runs a module parser and prefixes its configuration errors with the JSON path.
template <class F>
auto at_path(const std::string& path, F&& parse) {
  try {
    return parse();
  } catch (const Error& e) {
    if (e.code() != Errc::Config) throw;
    fail(Errc::Config, "config" + path + ": " + e.what());
  }
}

std::string vec_str(const std::optional<codes::SymbolVector>& v) { return v ? v->to_string() : "NULL"; }

json vec_json(const std::optional<codes::SymbolVector>& v) { return v ? json(*v) : json(nullptr); }

// ---------------------------------------------------------------- ann0

void cmd_ann0(const Options& opt, Artifacts& out) {
  const json cfg = load_config(opt, "ann0");
  const auto seed = resolve_seed(opt, cfg);
  const auto prog = at_path("/program", [&] { return afield::program_from_json(need(cfg, "program", "")); });
  if (prog.empty()) fail(Errc::Config, "config/program: no rows");
  const auto inputs = need_as<std::vector<codes::SymbolVector>>(cfg, "inputs");
  const auto params = ann0::params_from_program(prog.inputs(), prog.outputs(), opt_as(cfg, "alpha", 1.5),
                                                opt_as(cfg, "beta", 2.0), opt_as(cfg, "tau", 1.0),
                                                opt_as(cfg, "noise_amp", 1e-6));
  ann0::DriveSchedule sched;
  sched.dt_psy = opt_as(cfg, "dt_psy", sched.dt_psy);
  sched.dt = opt_as(cfg, "dt", sched.dt);
  sched.threshold_inh = opt_as(cfg, "threshold_inh", sched.threshold_inh);
  if (cfg.contains("reset_inh")) sched.reset_inh = need_as<double>(cfg, "reset_inh");
  const auto every = opt_as<std::size_t>(cfg, "trace_every", 100);
  if (every == 0) fail(Errc::Config, "config/trace_every: must be positive");

  std::vector<std::string> header{"t"};
  for (const char* name : {"u_", "r_"}) {
    for (std::size_t i = 1; i <= params.n(); ++i) header.push_back(name + std::to_string(i));
  }
  header.push_back("q");
  for (std::size_t k = 1; k <= params.k(); ++k) header.push_back("y_" + std::to_string(k));
  trace::CsvTable csv(header);
  std::size_t step = 0;
  const auto result = ann0::drive_as_symbol_machine(params, sched, inputs, seed, [&](const ann0::Ann0State& st, double x_inh) {
    if (step++ % every) return;
    const auto r = ann0::rectify(st.u);
    std::vector<std::string> row{trace::num(st.t)};
    for (double u : st.u) row.push_back(trace::num(u));
    for (double v : r) row.push_back(trace::num(v));
    row.push_back(trace::num(ann0::inhibition(st.u, x_inh, params)));
    for (double y : ann0::output_projection(r, params)) row.push_back(trace::num(y));
    csv.add_row(std::move(row));
  });

  // Built-in check: an AF-0 with the same program answers the same.
  afield::AfConfig af_cfg;
  af_cfg.similarity = codes::SimilarityKind::ScalarProduct;
  af_cfg.xinh = sched.threshold_inh;
  af_cfg.seed = seed;
  afield::AssociativeField af(af_cfg, prog);
  bool agree = true;
  json outputs = json::array();
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    agree = agree && af.cycle(inputs[k]) == result.outputs[k];
    outputs.push_back(vec_json(result.outputs[k]));
  }
  out.add("ann0_trace.csv", csv.str());
  out.add_json("ann0_summary.json", {{"kind", "ann0"},
                                     {"seed", seed},
                                     {"outputs", outputs},
                                     {"warnings", result.warnings},
                                     {"checks", {{"af0_agreement", agree}}}});
}

// ---------------------------------------------------------------- af

afield::EState estate_from_config(const json& cfg, afield::EState base) {
  if (!cfg.contains("estate")) return base;
  const auto& e = cfg.at("estate");
  base.tau_e = opt_as(e, "tau_e", base.tau_e, "/estate");
  base.bias_add = opt_as(e, "bias_add", base.bias_add, "/estate");
  base.bias_mul = opt_as(e, "bias_mul", base.bias_mul, "/estate");
  if (e.contains("e")) base = at_path("/estate/e", [&] { return afield::estate_from_json(e.at("e"), base); });
  return base;
}

void cmd_af(const Options& opt, const std::string& mode_flag, const std::string& trace_name, Artifacts& out) {
  const json cfg = load_config(opt, "af");
  const auto seed = resolve_seed(opt, cfg);
  const std::string mode = mode_flag.empty() ? opt_as<std::string>(cfg, "mode", "af0") : mode_flag;
  if (mode != "af0" && mode != "af1") fail(Errc::Config, "mode must be af0 or af1, got '" + mode + "'");

  afield::AfConfig af_cfg;
  af_cfg.seed = seed;
  af_cfg.estates_enabled = mode == "af1";
  af_cfg.xinh = opt_as(cfg, "xinh", af_cfg.xinh);
  af_cfg.similarity = at_path("/similarity", [&] {
    return codes::similarity_from_string(opt_as<std::string>(cfg, "similarity", "ratio"));
  });
  const auto guard = opt_as<std::string>(cfg, "guard", "raw");
  if (guard != "raw" && guard != "biased") fail(Errc::Config, "config/guard: must be raw or biased");
  af_cfg.guard = guard == "raw" ? afield::EncodeGuard::RawSimilarity : afield::EncodeGuard::BiasedSimilarity;

  std::optional<machines::CombinatorialMachine> machine;
  std::optional<codes::Codebook> in_book, out_book;
  afield::AssociativeProgram prog;
  afield::EState estate;
  std::vector<codes::SymbolVector> inputs;
  if (cfg.contains("machine")) {
    machine = at_path("/machine", [&] { return machines::combinatorial_from_json(cfg.at("machine")); });
    in_book = codes::Codebook::one_hot(machine->inputs.symbols());
    out_book = codes::Codebook::one_hot(machine->outputs.symbols());
    if (mode == "af0") {
      prog = afield::program_from_machine(*machine, *in_book, *out_book);
    } else {
      prog = afield::full_program(*in_book, *out_book);
      estate = afield::reconfigure(prog, *machine, *in_book, *out_book);
    }
    for (const auto& label : need_as<std::vector<std::string>>(cfg, "inputs")) {
      inputs.push_back(at_path("/inputs", [&] { return in_book->encode(label); }));
    }
  } else {
    prog = at_path("/program", [&] { return afield::program_from_json(need(cfg, "program", "")); });
    inputs = need_as<std::vector<codes::SymbolVector>>(cfg, "inputs");
  }
  estate = estate_from_config(cfg, estate);

  afield::AssociativeField af(af_cfg, prog, estate);
  std::vector<std::string> header{"cycle", "x", "win", "s_win", "se_win", "y"};
  if (opt.verbose) {
    for (std::size_t i = 0; i < prog.size(); ++i) header.push_back("e_" + std::to_string(i));
  }
  trace::CsvTable csv(header);
  json outputs = json::array();
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto y = af.cycle(inputs[k]);
    const auto& rec = af.last();
    std::vector<std::string> row{std::to_string(k), inputs[k].to_string(),
                                 rec.win ? std::to_string(*rec.win) : "",
                                 rec.win ? trace::num(rec.s[*rec.win]) : "", rec.win ? trace::num(rec.se[*rec.win]) : "",
                                 vec_str(y)};
    if (opt.verbose) {
      for (std::size_t i = 0; i < prog.size(); ++i) row.push_back(trace::num(af.estate().e.at(i)));
    }
    csv.add_row(std::move(row));
    if (machine) {
      outputs.push_back(y ? json(out_book->decode(*y).value_or(afield::kNullLabel)) : json(afield::kNullLabel));
    } else {
      outputs.push_back(vec_json(y));
    }
  }

  json checks = json::object();
  if (machine) {
    afield::AssociativeField probe(af_cfg, prog, estate);
    const auto v = machines::equivalent(afield::combinatorial_view(probe, *in_book, *out_book),
                                        machines::black_box(*machine), machines::ExhaustiveProbe{});
    checks["equivalent_to_machine"] = v.equivalent;
    if (!v.equivalent) checks["witness"] = v.detail;
  }
  checks["decoding"] = codes::correct_decoding_check(prog.inputs(), af_cfg.similarity).pass;
  out.add(trace_name.empty() ? "af_trace.csv" : trace_name, csv.str());
  out.add_json("af_summary.json",
               {{"kind", "af"}, {"mode", mode}, {"seed", seed}, {"rows", prog.size()}, {"outputs", outputs},
                {"checks", checks}});
}

// ---------------------------------------------------------------- fsm

void cmd_fsm(const Options& opt, Artifacts& out) {
  const json cfg = load_config(opt, "fsm");
  const auto seed = resolve_seed(opt, cfg);
  const auto teacher = at_path("/machine", [&] { return machines::mealy_from_json(need(cfg, "machine", "")); });
  const auto depth = opt_as<std::size_t>(cfg, "depth", 6);
  const auto max_cycles = opt_as<std::size_t>(cfg, "max_cycles", 100000);
  const auto layout = afield::one_hot_layout(teacher);
  afield::AfConfig af_cfg;
  af_cfg.seed = derive_seed(seed, 0);
  afield::AssociativeField af(af_cfg);
  const auto cycles = afield::demonstrate(af, teacher, layout, derive_seed(seed, 1), max_cycles);
  afield::AfMealyView view(af, layout);
  const auto v = machines::equivalent(view.black_box(), machines::black_box(teacher), machines::DepthProbe{depth});

  trace::CsvTable csv({"cycle", "x", "y_teacher", "y_learned"});
  const auto xs = opt_as<std::vector<std::string>>(cfg, "inputs", {});
  const auto expected = machines::run_mealy(teacher, xs);
  view.reset();
  for (std::size_t k = 0; k < xs.size(); ++k) csv.add_row({std::to_string(k), xs[k], expected[k], view.step(xs[k])});
  json checks{{"equivalent", v.equivalent}, {"depth", depth}};
  if (!v.equivalent) checks["witness"] = v.witness;
  out.add("fsm_trace.csv", csv.str());
  out.add_json("fsm_summary.json", {{"kind", "fsm"},
                                    {"seed", seed},
                                    {"demonstration_cycles", cycles},
                                    {"rows", af.program().size()},
                                    {"checks", checks}});
}

// ---------------------------------------------------------------- robot

robot::BrainConfig brain_config(const json& cfg, std::uint64_t seed) {
  robot::BrainConfig b;
  b.seed = seed;
  const json& c = cfg.contains("brain") ? cfg.at("brain") : json::object();
  b.max_cells = opt_as(c, "max_cells", b.max_cells, "/brain");
  b.image_tau_e = opt_as(c, "image_tau_e", b.image_tau_e, "/brain");
  b.image_xinh = opt_as(c, "image_xinh", b.image_xinh, "/brain");
  b.exact_xinh = opt_as(c, "exact_xinh", b.exact_xinh, "/brain");
  b.max_cycles = opt_as(c, "max_cycles", b.max_cycles, "/brain");
  return b;
}

void add_trace_rows(trace::CsvTable& csv, const robot::Episode& ep, std::size_t& cycle) {
  std::istringstream lines(robot::trace_csv(ep));
  std::string line;
  std::getline(lines, line);  // header
  while (std::getline(lines, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    cells.at(0) = std::to_string(cycle++);
    csv.add_row(std::move(cells));
  }
}

const std::vector<std::string> kRobotHeader = {"cycle",    "seen",      "uttered_fb", "cmd_write",
                                               "cmd_move", "cmd_utter", "source",     "sensory_source"};

void cmd_robot_train(const Options& opt, const std::string& tapes_path, const std::string& brain_out,
                     std::size_t episodes, Artifacts& out) {
  const json cfg = load_config(opt, "robot-train", false);
  const auto seed = resolve_seed(opt, cfg);
  const json tj = parse_json(read_file(tapes_path), tapes_path);
  const json& list = tj.is_object() ? need(tj, "tapes", "") : tj;
  std::vector<std::string> tapes;
  try {
    tapes = list.get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(Errc::Config, tapes_path + ": expected a list of tape strings: " + e.what());
  }
  robot::Brain brain(brain_config(cfg, seed));
  const auto eps = robot::train(brain, tapes, episodes);
  trace::CsvTable csv(kRobotHeader);
  std::size_t cycle = 0;
  json verdicts = json::array();
  for (const auto& ep : eps) {
    add_trace_rows(csv, ep, cycle);
    verdicts.push_back(ep.verdict ? json(*ep.verdict) : json(nullptr));
  }
  out.add(brain_out.empty() ? "brain.json" : brain_out, robot::to_json(brain).dump() + "\n");
  out.add("robot_train.csv", csv.str());
  out.add_json("robot_train_summary.json", {{"kind", "robot-train"},
                                            {"seed", seed},
                                            {"tapes", tapes},
                                            {"episodes", episodes},
                                            {"teacher_verdicts", verdicts},
                                            {"am_rows", brain.am.program().size()},
                                            {"kinematics_rows", brain.kinematics.program().size()},
                                            {"speech_rows", brain.speech.program().size()},
                                            {"image_rows", brain.image.program().size()}});
}

void cmd_robot_exam(const Options& opt, const std::string& brain_path, const std::string& tape, bool mental,
                    Artifacts& out) {
  const json cfg = load_config(opt, "robot-exam", false);
  const auto seed = resolve_seed(opt, cfg);
  json bj = parse_json(read_file(brain_path), brain_path);
  if (bj.contains("config") && bj["config"].is_object()) bj["config"]["seed"] = seed;
  robot::Brain brain = robot::brain_from_json(bj);
  const auto real = robot::exam_real(brain, tape);
  std::size_t cycle = 0;
  trace::CsvTable real_csv(kRobotHeader);
  add_trace_rows(real_csv, real, cycle);
  const auto expected = robot::balanced_verdict(tape);
  auto verdict = [](const robot::Episode& ep) { return ep.verdict ? json(*ep.verdict) : json(nullptr); };
  json summary{{"kind", "robot-exam"},
               {"seed", seed},
               {"tape", tape},
               {"expected_verdict", expected},
               {"real_verdict", verdict(real)},
               {"real_cycles", real.trace.size()},
               {"final_tape", real.final_tape}};
  json checks{{"real_correct", real.verdict == expected}};
  out.add("robot_exam.csv", real_csv.str());
  if (mental) {
    const auto imagined = robot::exam_mental(brain, tape);
    bool same = imagined.trace.size() == real.trace.size() && imagined.verdict == real.verdict;
    for (std::size_t k = 0; same && k < real.trace.size(); ++k) {
      same = imagined.trace[k].command == real.trace[k].command;
    }
    cycle = 0;
    trace::CsvTable mental_csv(kRobotHeader);
    add_trace_rows(mental_csv, imagined, cycle);
    out.add("robot_mental.csv", mental_csv.str());
    summary["mental_verdict"] = verdict(imagined);
    summary["imagined_tape"] = imagined.final_tape;
    checks["mental_equals_real"] = same;
  }
  summary["checks"] = checks;
  out.add_json("robot_exam_summary.json", summary);
}

// ---------------------------------------------------------------- pmm

pmm::PmmSpec spec_from_config(const json& cfg) {
  if (cfg.contains("channel5")) {
    return at_path("/channel5", [&] { return pmm::channel5_spec(pmm::channel5_from_json(cfg.at("channel5"))); });
  }
  return at_path("/spec", [&] { return pmm::spec_from_json(need(cfg, "spec", "")); });
}

pmm::InputSignal signal_from_config(const json& cfg) {
  if (!cfg.contains("signal")) return {{0.0, {0.0}}};
  return at_path("/signal", [&] { return pmm::signal_from_json(cfg.at("signal")); });
}

const pmm::Input& input_at(const pmm::InputSignal& sig, double t) {
  std::size_t k = 0;
  while (k + 1 < sig.size() && sig[k + 1].t <= t) ++k;
  return sig[k].x;
}

void cmd_pmm(const Options& opt, const std::string& what, Artifacts& out) {
  const json cfg = load_config(opt, "pmm");
  const auto seed = resolve_seed(opt, cfg);
  if (what == "ghk") {
    const auto params = at_path("/ghk", [&] {
      const auto& g = need(cfg, "ghk", "");
      pmm::ChannelParams c;
      c.permeability = need_as<std::vector<double>>(g, "permeability", "/ghk");
      c.z = opt_as(g, "z", 1, "/ghk");
      c.temperature = opt_as(g, "temperature", 300.0, "/ghk");
      c.c_in = need_as<double>(g, "c_in", "/ghk");
      c.c_out = need_as<double>(g, "c_out", "/ghk");
      c.validate(c.permeability.size());
      return c;
    });
    const double v0 = opt_as(cfg, "v_min", -0.1), v1 = opt_as(cfg, "v_max", 0.1), dv = opt_as(cfg, "v_step", 0.005);
    if (!(dv > 0.0) || !(v1 >= v0)) fail(Errc::Config, "config: need v_min <= v_max and v_step > 0");
    std::vector<std::string> header{"v"};
    for (std::size_t j = 0; j < params.permeability.size(); ++j) header.push_back("I_" + std::to_string(j));
    trace::CsvTable csv(header);
    const auto n = static_cast<std::size_t>(std::floor((v1 - v0) / dv + 1e-9)) + 1;
    for (std::size_t k = 0; k < n; ++k) {
      const double v = v0 + double(k) * dv;
      std::vector<std::string> row{trace::num(v)};
      for (std::size_t j = 0; j < params.permeability.size(); ++j) row.push_back(trace::num(pmm::ghk_current(v, j, params)));
      csv.add_row(std::move(row));
    }
    out.add("pmm_ghk.csv", csv.str());
    out.add_json("pmm_ghk_summary.json", {{"kind", "pmm-ghk"}, {"seed", seed}, {"nernst", params.nernst()}});
    return;
  }

  const auto spec = spec_from_config(cfg);
  const auto signal = signal_from_config(cfg);
  const double t_end = need_as<double>(cfg, "t_end");
  if (what == "path") {
    const auto s0 = opt_as<std::size_t>(cfg, "s0", 0);
    const auto path = pmm::sample_path(spec, signal, s0, t_end, seed);
    trace::CsvTable csv({"time", "state"});
    for (const auto& tr : path) csv.add_row({trace::num(tr.t), std::to_string(tr.state)});
    out.add("pmm_path.csv", csv.str());
    out.add_json("pmm_path_summary.json", {{"kind", "pmm-path"},
                                           {"seed", seed},
                                           {"transitions", path.size() - 1},
                                           {"final_state", path.back().state}});
    return;
  }
  // master
  const double dt = need_as<double>(cfg, "dt");
  if (!(dt > 0.0)) fail(Errc::Config, "config/dt: must be positive");
  auto p = opt_as<std::vector<double>>(cfg, "P0", {});
  if (p.empty()) {
    p.assign(spec.n_states, 0.0);
    p[0] = 1.0;
  }
  if (p.size() != spec.n_states) fail(Errc::Config, "config/P0: length differs from the state count");
  const auto every = opt_as<std::size_t>(cfg, "sample_every", 1);
  if (every == 0) fail(Errc::Config, "config/sample_every: must be positive");
  std::vector<std::string> header{"t"};
  for (std::size_t i = 0; i < spec.n_states; ++i) header.push_back("P_" + std::to_string(i));
  trace::CsvTable csv(header);
  auto record = [&](double t) {
    std::vector<std::string> row{trace::num(t)};
    for (double v : p) row.push_back(trace::num(v));
    csv.add_row(std::move(row));
  };
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  double worst = pmm::conservation_residual(p);
  record(0.0);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t0 = double(k - 1) * dt;
    p = pmm::master_step(p, input_at(signal, t0), spec, dt);
    worst = std::max(worst, pmm::conservation_residual(p));
    if (k % every == 0 || k == steps) record(double(k) * dt);
  }
  out.add("pmm_master.csv", csv.str());
  out.add_json("pmm_master_summary.json", {{"kind", "pmm-master"},
                                           {"seed", seed},
                                           {"final_P", p},
                                           {"checks", {{"max_residual", worst}, {"conserved", worst < 1e-9}}}});
}

// ---------------------------------------------------------------- epmm

epmm::StepMode step_mode(const std::string& s) {
  if (s == "tau-leap") return epmm::StepMode::TauLeap;
  if (s == "exact") return epmm::StepMode::Exact;
  fail(Errc::Config, "config/mode: must be tau-leap, exact or meanfield, got '" + s + "'");
}

void cmd_epmm_run(const Options& opt, Artifacts& out) {
  const json cfg = load_config(opt, "epmm");
  const auto seed = resolve_seed(opt, cfg);
  const auto spec = spec_from_config(cfg);
  const auto signal = signal_from_config(cfg);
  const auto n = need_as<std::int64_t>(cfg, "N");
  const double dt = need_as<double>(cfg, "dt");
  const double t_end = need_as<double>(cfg, "t_end");
  const auto mode_name = opt_as<std::string>(cfg, "mode", "tau-leap");
  const bool meanfield = mode_name == "meanfield";
  const auto mode = meanfield ? epmm::StepMode::TauLeap : step_mode(mode_name);
  const auto every = opt_as<std::size_t>(cfg, "sample_every", 1);
  if (every == 0) fail(Errc::Config, "config/sample_every: must be positive");
  if (!(dt > 0.0)) fail(Errc::Config, "config/dt: must be positive");
  auto ens = at_path("", [&] { return epmm::Ensemble::at_state(spec, n, opt_as<std::size_t>(cfg, "s0", 0)); });
  std::vector<double> e_bar = ens.fractions();
  Rng rng(seed);

  std::vector<std::string> header{"t"};
  for (std::size_t i = 0; i < spec.n_states; ++i) header.push_back("N_" + std::to_string(i));
  header.push_back("y");
  trace::CsvTable csv(header);
  auto record = [&](double t) {
    const auto& x = input_at(signal, t);
    std::vector<std::string> row{trace::num(t)};
    if (meanfield) {
      for (double e : e_bar) row.push_back(trace::num(double(n) * e));
      row.push_back(trace::num(epmm::meanfield_output(e_bar, n, x, spec)));
    } else {
      for (auto k : ens.occupations) row.push_back(std::to_string(k));
      row.push_back(trace::num(epmm::ensemble_output(ens, x)));
    }
    csv.add_row(std::move(row));
  };
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  record(0.0);
  for (std::size_t k = 1; k <= steps; ++k) {
    const auto& x = input_at(signal, double(k - 1) * dt);
    if (meanfield) {
      e_bar = epmm::meanfield_step(e_bar, x, spec, dt);
    } else {
      epmm::ensemble_step(ens, x, dt, rng, mode);
    }
    if (k % every == 0 || k == steps) record(double(k) * dt);
  }
  json final_occ = meanfield ? json(e_bar) : json(ens.occupations);
  out.add("epmm_trace.csv", csv.str());
  out.add_json("epmm_summary.json",
               {{"kind", "epmm"}, {"seed", seed}, {"mode", mode_name}, {"N", n}, {"final", final_occ}});
}

void cmd_epmm_spike(const Options& opt, Artifacts& out) {
  const json cfg = load_config(opt, "spike");
  const auto seed = resolve_seed(opt, cfg);
  epmm::CoupledSystem sys;
  const auto& ens_list = need(cfg, "ensembles", "");
  if (!ens_list.is_array() || ens_list.empty()) fail(Errc::Config, "config/ensembles: need a non-empty array");
  for (std::size_t k = 0; k < ens_list.size(); ++k) {
    const std::string path = "/ensembles/" + std::to_string(k);
    const auto spec = spec_from_config(ens_list[k]);
    const auto n = need_as<std::int64_t>(ens_list[k], "N", path);
    sys.ensembles.push_back(at_path(path, [&] { return epmm::Ensemble::at_state(spec, n, 0); }));
  }
  if (cfg.contains("membrane")) {
    const auto& m = cfg.at("membrane");
    sys.membrane.c_m = opt_as(m, "c_m", sys.membrane.c_m, "/membrane");
    sys.membrane.g_leak = opt_as(m, "g_leak", sys.membrane.g_leak, "/membrane");
    sys.membrane.e_leak = opt_as(m, "e_leak", sys.membrane.e_leak, "/membrane");
    sys.membrane.max_dv = opt_as(m, "max_dv", sys.membrane.max_dv, "/membrane");
  }
  for (const auto& p : opt_as<json>(cfg, "stimulus", json::array())) {
    sys.membrane.stimulus.push_back(
        {need_as<double>(p, "t_on", "/stimulus"), need_as<double>(p, "t_off", "/stimulus"),
         need_as<double>(p, "amplitude", "/stimulus")});
  }
  for (const auto& l : opt_as<json>(cfg, "links", json::array())) {
    sys.links.push_back({need_as<std::size_t>(l, "source", "/links"), need_as<std::size_t>(l, "target", "/links"),
                         opt_as(l, "gain", 1.0, "/links"), opt_as(l, "tau", 1.0, "/links")});
  }
  sys.v = opt_as(cfg, "v0", sys.membrane.e_leak);
  const auto mode_name = opt_as<std::string>(cfg, "mode", "tau-leap");
  sys.meanfield = mode_name == "meanfield";
  if (!sys.meanfield) sys.mode = step_mode(mode_name);
  for (const auto& e : sys.ensembles) sys.e_bar.push_back(e.fractions());
  at_path("", [&] {
    sys.validate();
    return 0;
  });
  const double dt = need_as<double>(cfg, "dt");
  const double t_end = need_as<double>(cfg, "t_end");
  const auto every = opt_as<std::size_t>(cfg, "sample_every", 10);
  if (!(dt > 0.0)) fail(Errc::Config, "config/dt: must be positive");
  if (every == 0) fail(Errc::Config, "config/sample_every: must be positive");

  std::vector<Rng> rngs;
  for (std::size_t k = 0; k < sys.ensembles.size(); ++k) rngs.emplace_back(derive_seed(seed, k));
  std::vector<std::string> header{"t", "V"};
  for (std::size_t k = 0; k < sys.ensembles.size(); ++k) {
    for (std::size_t i = 0; i < sys.ensembles[k].spec.n_states; ++i) {
      header.push_back("e" + std::to_string(k) + "_" + std::to_string(i));
    }
  }
  for (std::size_t k = 0; k < sys.ensembles.size(); ++k) header.push_back("I" + std::to_string(k));
  header.push_back("I_stim");
  trace::CsvTable csv(header);
  const double rest = sys.v;
  double peak = sys.v;
  std::vector<std::vector<double>> max_occ;
  for (std::size_t k = 0; k < sys.ensembles.size(); ++k) max_occ.push_back(sys.fractions(k));
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  for (std::size_t s = 1; s <= steps; ++s) {
    const auto r = epmm::coupled_step(sys, dt, rngs);
    peak = std::max(peak, sys.v);
    for (std::size_t k = 0; k < sys.ensembles.size(); ++k) {
      const auto f = sys.fractions(k);
      for (std::size_t i = 0; i < f.size(); ++i) max_occ[k][i] = std::max(max_occ[k][i], f[i]);
    }
    if (s % every && s != steps) continue;
    std::vector<std::string> row{trace::num(sys.t), trace::num(sys.v)};
    for (std::size_t k = 0; k < sys.ensembles.size(); ++k) {
      for (double f : sys.fractions(k)) row.push_back(trace::num(f));
    }
    for (double i : r.currents) row.push_back(trace::num(i));
    row.push_back(trace::num(r.stimulus));
    csv.add_row(std::move(row));
  }
  out.add("epmm_spike.csv", csv.str());
  out.add_json("epmm_spike_summary.json", {{"kind", "spike"},
                                           {"seed", seed},
                                           {"rest", rest},
                                           {"peak", peak},
                                           {"final_v", sys.v},
                                           {"max_occupancy", max_occ}});
}

// ---------------------------------------------------------------- verify

int cmd_verify(const Options& opt, const std::string& suite, unsigned workers, Artifacts& out) {
  const auto seed = opt.seed.value_or(kVerifySeed);
  const auto results = acceptance::run_suite(suite, seed, workers);
  bool all = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.id << " " << r.suite << ": " << r.title;
    if (opt.verbose || !r.pass) std::cout << " -- " << r.detail;
    std::cout << " (" << trace::num(std::round(r.seconds * 1000.0) / 1000.0) << " s)\n";
    all = all && r.pass;
  }
  auto report = acceptance::to_json(results, false);
  report["seed"] = seed;
  out.add_json("verify_report.json", report);
  return all ? 0 : 3;
}

void write_artifacts(const Options& opt, const Artifacts& out) {
  const fs::path dir(opt.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(Errc::Config, "cannot create output directory '" + opt.out_dir + "': " + ec.message());
  for (const auto& [name, content] : out.files) {
    const fs::path target = fs::path(name).is_absolute() ? fs::path(name) : dir / name;
    std::ofstream f(target, std::ios::binary);
    f << content;
    if (!f) fail(Errc::Config, "cannot write '" + target.string() + "'");
    if (opt.verbose) std::cerr << "wrote " << target.string() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"E-machine simulations: associative fields, tape robot, protein-molecule machines"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--seed", opt.seed, "master seed (overrides the config's \"seed\")");
  app.add_option("--config", opt.config_path, "experiment configuration (JSON)");
  app.add_option("--out-dir", opt.out_dir, "directory for traces and summaries")->capture_default_str();
  app.add_flag("--verbose,-v", opt.verbose, "more detail in traces and reports");

  auto* ann0_cmd = app.add_subcommand("ann0", "drive the winner-take-all network as a symbol machine");

  std::string af_mode, af_trace;
  auto* af_cmd = app.add_subcommand("af", "run an associative field over an input sequence");
  af_cmd->add_option("--mode", af_mode, "af0 or af1")->check(CLI::IsMember({"af0", "af1"}));
  af_cmd->add_option("--trace", af_trace, "trace file name (default <out-dir>/af_trace.csv)");

  auto* fsm_cmd = app.add_subcommand("fsm", "teach a Mealy machine to an associative field by demonstration");

  auto* robot_cmd = app.add_subcommand("robot", "parenthesis-checking tape robot");
  robot_cmd->require_subcommand(1);
  std::string tapes_path, brain_out, brain_path, tape;
  std::size_t episodes = 1;
  bool mental = false;
  auto* train_cmd = robot_cmd->add_subcommand("train", "teacher-forced training");
  train_cmd->add_option("--tapes", tapes_path, "JSON list of input strings")->required();
  train_cmd->add_option("--out", brain_out, "brain file (default <out-dir>/brain.json)");
  train_cmd->add_option("--episodes", episodes, "passes over the tape list")->capture_default_str();
  auto* exam_cmd = robot_cmd->add_subcommand("exam", "examine a trained brain on one tape");
  exam_cmd->add_option("--brain", brain_path, "brain file from robot train")->required();
  exam_cmd->add_option("--tape", tape, "input string, e.g. \"(())\"")->required();
  exam_cmd->add_flag("--mental", mental, "also run on the imagined tape and compare");

  auto* pmm_cmd = app.add_subcommand("pmm", "single protein-molecule machine");
  pmm_cmd->require_subcommand(1);
  auto* pmm_path = pmm_cmd->add_subcommand("path", "sample a state path");
  auto* pmm_master = pmm_cmd->add_subcommand("master", "integrate the master equation");
  auto* pmm_ghk = pmm_cmd->add_subcommand("ghk", "tabulate GHK currents");

  auto* epmm_cmd = app.add_subcommand("epmm", "ensembles of protein-molecule machines");
  epmm_cmd->require_subcommand(1);
  auto* epmm_run = epmm_cmd->add_subcommand("run", "simulate one ensemble");
  auto* epmm_spike = epmm_cmd->add_subcommand("spike", "coupled ensembles on a shared membrane");

  std::string suite;
  unsigned workers = 0;
  auto* verify_cmd = app.add_subcommand("verify", "run acceptance suites");
  verify_cmd->add_option("suite", suite, "suite name or \"all\"")->required();
  verify_cmd->add_option("--workers", workers, "threads for parallel suites (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    Artifacts out;
    int status = 0;
    if (*ann0_cmd) {
      cmd_ann0(opt, out);
    } else if (*af_cmd) {
      cmd_af(opt, af_mode, af_trace, out);
    } else if (*fsm_cmd) {
      cmd_fsm(opt, out);
    } else if (*train_cmd) {
      cmd_robot_train(opt, tapes_path, brain_out, episodes, out);
    } else if (*exam_cmd) {
      cmd_robot_exam(opt, brain_path, tape, mental, out);
    } else if (*pmm_path) {
      cmd_pmm(opt, "path", out);
    } else if (*pmm_master) {
      cmd_pmm(opt, "master", out);
    } else if (*pmm_ghk) {
      cmd_pmm(opt, "ghk", out);
    } else if (*epmm_run) {
      cmd_epmm_run(opt, out);
    } else if (*epmm_spike) {
      cmd_epmm_spike(opt, out);
    } else if (*verify_cmd) {
      status = cmd_verify(opt, suite, workers, out);
    }
    write_artifacts(opt, out);
    return status;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
