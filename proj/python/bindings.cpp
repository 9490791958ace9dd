#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "emachine/acceptance.hpp"
#include "emachine/afield.hpp"
#include "emachine/ann0.hpp"
#include "emachine/codes.hpp"
#include "emachine/epmm.hpp"
#include "emachine/pmm.hpp"
#include "emachine/robot.hpp"

namespace py = pybind11;
using namespace emachine;

namespace {

codes::SymbolVector sv(const std::vector<int>& v) { return codes::SymbolVector(v); }

std::optional<std::vector<int>> to_list(const std::optional<codes::SymbolVector>& v) {
  if (!v) return std::nullopt;
  return std::vector<int>(v->components().begin(), v->components().end());
}

std::vector<int> to_list(const codes::SymbolVector& v) { return {v.components().begin(), v.components().end()}; }

codes::SimilarityKind kind_of(const std::string& name) { return codes::similarity_from_string(name); }

nlohmann::json parse(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Config, e.what());
  }
}

py::dict episode_dict(const robot::Episode& ep) {
  py::list commands;
  for (const auto& row : ep.trace) {
    commands.append(py::make_tuple(row.command.write.value_or(robot::kNone), robot::to_symbol(row.command.move),
                                   row.command.utter.value_or(robot::kNone), row.command.halt));
  }
  py::dict d;
  d["verdict"] = ep.verdict ? py::cast(*ep.verdict) : py::none();
  d["final_tape"] = ep.final_tape;
  d["cycles"] = ep.trace.size();
  d["commands"] = commands;
  d["trace_csv"] = robot::trace_csv(ep);
  return d;
}

/// Associative field configured from keyword arguments.
class PyField {
 public:
  PyField(const std::string& similarity, double xinh, std::uint64_t seed, bool estates, double tau_e, double bias_add,
          double bias_mul)
      : field_(make_config(similarity, xinh, seed, estates), afield::AssociativeProgram{}, make_estate(tau_e, bias_add, bias_mul)) {}

  std::optional<std::vector<int>> cycle(const std::vector<int>& x) { return to_list(field_.cycle(sv(x))); }
  void teach(const std::vector<int>& x, const std::vector<int>& y) { field_.cycle_forced(sv(x), sv(y)); }
  std::size_t size() const { return field_.program().size(); }
  std::vector<double> estate() const { return field_.estate().e; }
  void set_estate(const std::vector<double>& e) {
    auto s = field_.estate();
    s.e = e;
    field_.set_estate(s);
  }
  void reset() { field_.reset(); }
  std::string program_json() const { return afield::to_json(field_.program()).dump(); }
  void load_program(const std::string& text) {
    field_.program() = afield::program_from_json(parse(text));
    auto s = field_.estate();
    s.e.assign(field_.program().size(), 0.0);
    field_.set_estate(s);
  }

 private:
  static afield::AfConfig make_config(const std::string& similarity, double xinh, std::uint64_t seed, bool estates) {
    afield::AfConfig c;
    c.similarity = kind_of(similarity);
    c.xinh = xinh;
    c.seed = seed;
    c.estates_enabled = estates;
    return c;
  }
  static afield::EState make_estate(double tau_e, double a, double b) {
    afield::EState e;
    e.tau_e = tau_e;
    e.bias_add = a;
    e.bias_mul = b;
    return e;
  }

  afield::AssociativeField field_;
};

}  // namespace

PYBIND11_MODULE(_emachine, m) {
  m.doc() = "E-machine simulations: associative fields, tape robot, protein-molecule machines";

  static py::exception<Error> error(m, "EmachineError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (std::string(to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  m.def("similarity", [](const std::vector<int>& x, const std::vector<int>& g, const std::string& kind) {
    return codes::similarity(sv(x), sv(g), kind_of(kind));
  }, py::arg("x"), py::arg("g"), py::arg("kind") = "ratio");

  m.def("correct_decoding", [](const std::vector<std::vector<int>>& set, const std::string& kind) {
    std::vector<codes::SymbolVector> v;
    for (const auto& c : set) v.push_back(sv(c));
    return codes::correct_decoding_check(v, kind_of(kind)).pass;
  }, py::arg("codes"), py::arg("kind") = "ratio");

  m.def("closed_form_u", [](double alpha, double beta, double tau, const std::vector<double>& s,
                            const std::vector<double>& u0, double x_inh, const std::vector<std::size_t>& active,
                            double t) {
    ann0::Ann0Params p;
    p.alpha = alpha;
    p.beta = beta;
    p.tau = tau;
    return ann0::closed_form_u(p, s, u0, x_inh, active, t);
  }, py::arg("alpha"), py::arg("beta"), py::arg("tau"), py::arg("s"), py::arg("u0"), py::arg("x_inh"),
     py::arg("active"), py::arg("t"));

  m.def("run_wta", [](const std::vector<double>& s, std::uint64_t seed, double alpha, double beta, double noise) {
    ann0::Ann0Params p;
    p.alpha = alpha;
    p.beta = beta;
    p.noise_amp = noise;
    p.gx = ann0::Matrix::identity(s.size());
    p.gy = ann0::Matrix::identity(s.size());
    const auto r = ann0::run_wta(p, s, 0.0, seed);
    return py::make_tuple(r.winner, r.settle_time);
  }, py::arg("s"), py::arg("seed"), py::arg("alpha") = 1.5, py::arg("beta") = 2.0, py::arg("noise_amp") = 1e-6);

  py::class_<PyField>(m, "AssociativeField")
      .def(py::init<const std::string&, double, std::uint64_t, bool, double, double, double>(),
           py::arg("similarity") = "ratio", py::arg("xinh") = 0.5, py::arg("seed") = 0, py::arg("estates") = false,
           py::arg("tau_e") = 10.0, py::arg("bias_add") = 0.0, py::arg("bias_mul") = 0.0)
      .def("cycle", &PyField::cycle, py::arg("x"), "One decision cycle; None is the NULL output.")
      .def("teach", &PyField::teach, py::arg("x"), py::arg("y"), "Cycle with the output forced and recorded.")
      .def("__len__", &PyField::size)
      .def_property("estate", &PyField::estate, &PyField::set_estate)
      .def("reset", &PyField::reset)
      .def("program_json", &PyField::program_json)
      .def("load_program", &PyField::load_program, py::arg("text"));

  m.def("ghk_current", [](double v, double permeability, int z, double temperature, double c_in, double c_out) {
    pmm::ChannelParams c;
    c.permeability = {permeability};
    c.z = z;
    c.temperature = temperature;
    c.c_in = c_in;
    c.c_out = c_out;
    c.validate(1);
    return pmm::ghk_current(v, 0, c);
  }, py::arg("v"), py::arg("permeability"), py::arg("z") = 1, py::arg("temperature") = 300.0, py::arg("c_in"),
     py::arg("c_out"));

  py::class_<pmm::PmmSpec>(m, "PmmSpec")
      .def_static("from_json", [](const std::string& text) { return pmm::spec_from_json(parse(text)); })
      .def_static("channel5", [](const std::string& text) {
        return pmm::channel5_spec(pmm::channel5_from_json(parse(text)));
      })
      .def_readonly("n_states", &pmm::PmmSpec::n_states)
      .def("to_json", [](const pmm::PmmSpec& s) { return pmm::to_json(s).dump(); })
      .def("master_step", [](const pmm::PmmSpec& s, const std::vector<double>& p, const std::vector<double>& x,
                             double dt) { return pmm::master_step(p, x, s, dt); },
           py::arg("p"), py::arg("x"), py::arg("dt"))
      .def("sample_path", [](const pmm::PmmSpec& s, const std::vector<double>& x, std::size_t s0, double t_end,
                             std::uint64_t seed) {
        std::vector<std::pair<double, std::size_t>> out;
        for (const auto& tr : pmm::sample_path(s, {{0.0, x}}, s0, t_end, seed)) out.emplace_back(tr.t, tr.state);
        return out;
      }, py::arg("x"), py::arg("s0"), py::arg("t_end"), py::arg("seed"));

  m.def("simulate_ensemble", [](const pmm::PmmSpec& spec, std::int64_t n, const std::vector<double>& x, double dt,
                                std::size_t steps, std::uint64_t seed, bool exact) {
    auto ens = epmm::Ensemble::at_state(spec, n);
    Rng rng(seed);
    std::vector<std::vector<std::int64_t>> out{ens.occupations};
    for (std::size_t k = 0; k < steps; ++k) {
      epmm::ensemble_step(ens, x, dt, rng, exact ? epmm::StepMode::Exact : epmm::StepMode::TauLeap);
      out.push_back(ens.occupations);
    }
    return out;
  }, py::arg("spec"), py::arg("n"), py::arg("x"), py::arg("dt"), py::arg("steps"), py::arg("seed"),
     py::arg("exact") = false, "Occupation numbers after each step, starting from all molecules in state 0.");

  py::class_<robot::Brain>(m, "Brain")
      .def(py::init([](std::uint64_t seed, std::size_t max_cells) {
        robot::BrainConfig c;
        c.seed = seed;
        c.max_cells = max_cells;
        return robot::Brain(c);
      }), py::arg("seed") = 0, py::arg("max_cells") = 16)
      .def("train", [](robot::Brain& b, const std::vector<std::string>& tapes, std::size_t episodes) {
        robot::train(b, tapes, episodes);
      }, py::arg("tapes"), py::arg("episodes") = 1)
      .def("exam_real", [](robot::Brain& b, const std::string& t) { return episode_dict(robot::exam_real(b, t)); })
      .def("exam_mental", [](robot::Brain& b, const std::string& t) { return episode_dict(robot::exam_mental(b, t)); })
      .def("missing", [](const robot::Brain& b, const std::string& t) { return robot::coverage(b, t).missing; },
           "Associations the teacher would use on the tape that are not stored yet.")
      .def("to_json", [](const robot::Brain& b) { return robot::to_json(b).dump(); })
      .def_static("from_json", [](const std::string& text) { return robot::brain_from_json(parse(text)); })
      .def_property_readonly("am_rows", [](const robot::Brain& b) { return b.am.program().size(); });

  m.def("teacher_episode", [](const std::string& t) { return episode_dict(robot::teacher_episode(t)); });

  m.def("suite_names", &acceptance::suite_names);
  m.def("verify", [](const std::string& suite, std::uint64_t seed) {
    std::vector<acceptance::CriterionResult> r;
    {
      py::gil_scoped_release release;
      r = acceptance::run_suite(suite, seed);
    }
    return acceptance::to_json(r).dump();
  }, py::arg("suite"), py::arg("seed") = 1, "JSON report of the named acceptance suite (or \"all\").");
}
