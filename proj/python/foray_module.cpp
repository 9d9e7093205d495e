#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <memory>
#include <sstream>

#include "foray/emitter.hpp"
#include "foray/error.hpp"
#include "foray/model.hpp"
#include "foray/synth.hpp"

namespace py = pybind11;
using namespace foray;

namespace {

FilterConfig make_config(std::uint64_t n_exec, std::uint64_t n_loc, std::size_t footprint_cap) {
  FilterConfig cfg;
  cfg.n_exec = n_exec;
  cfg.n_loc = n_loc;
  cfg.footprint_cap = footprint_cap;
  cfg.validate();
  return cfg;
}

std::shared_ptr<ForayModel> analyze_stream(std::istream& in, const FilterConfig& cfg) {
  TraceReader reader(in);
  return std::make_shared<ForayModel>(analyze(reader, cfg));
}

py::dict category_dict(const CategoryStats& c) {
  py::dict d;
  d["references"] = c.references;
  d["accesses"] = c.accesses;
  d["footprint"] = c.footprint;
  return d;
}

py::dict stats_dict(const ModelStats& s) {
  py::dict d;
  d["total"] = category_dict(s.total);
  d["included"] = category_dict(s.included);
  d["purged"] = category_dict(s.purged);
  d["non_analyzable"] = category_dict(s.non_analyzable);
  d["static_loops"] = s.static_loops;
  d["loop_nodes"] = s.loop_nodes;
  d["model_loops"] = s.model_loops;
  return d;
}

}  // namespace

PYBIND11_MODULE(_foray, m) {
  m.doc() = "Loop-nest and affine index expression extraction from memory traces";

  py::register_exception<TraceError>(m, "TraceError", PyExc_ValueError);
  py::register_exception<SpecError>(m, "SpecError", PyExc_ValueError);

  py::class_<ForayModel, std::shared_ptr<ForayModel>>(m, "Model")
      .def("emit_c", [](const ForayModel& self) { return emit_c(self); })
      .def("report_json", [](const ForayModel& self) { return emit_report(self); })
      .def("stats", [](const ForayModel& self) { return stats_dict(self.stats); })
      .def("format_stats", [](const ForayModel& self) { return format_stats(self.stats); })
      .def_property_readonly("memory_events", [](const ForayModel& self) { return self.memory_events; })
      .def_property_readonly("peak_live_state",
                             [](const ForayModel& self) { return self.peak_live_state; })
      .def_property_readonly("hint_count", [](const ForayModel& self) { return self.hints.size(); });

  m.def(
      "analyze_text",
      [](const std::string& text, std::uint64_t n_exec, std::uint64_t n_loc, std::size_t cap) {
        std::istringstream in(text);
        return analyze_stream(in, make_config(n_exec, n_loc, cap));
      },
      py::arg("text"), py::arg("n_exec") = 20, py::arg("n_loc") = 10, py::arg("footprint_cap") = 0,
      "Analyze a trace given as text.");

  m.def(
      "analyze_file",
      [](const std::string& path, std::uint64_t n_exec, std::uint64_t n_loc, std::size_t cap) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw py::value_error("cannot open " + path);
        py::gil_scoped_release release;
        return analyze_stream(in, make_config(n_exec, n_loc, cap));
      },
      py::arg("path"), py::arg("n_exec") = 20, py::arg("n_loc") = 10, py::arg("footprint_cap") = 0,
      "Analyze a trace file in one streaming pass.");

  m.def(
      "synth",
      [](const std::string& spec_json, std::uint64_t seed) {
        std::string out;
        synth::run(synth::parse_spec(spec_json), seed,
                   synth::EventSink{[&](const TraceRecord& r) {
                                      out += encode_record(r);
                                      out += '\n';
                                    },
                                    {}});
        return out;
      },
      py::arg("spec_json"), py::arg("seed") = 0, "Generate a trace from a workload spec.");

  m.def(
      "check",
      [](const std::string& spec_json, std::uint64_t seed, std::uint64_t n_exec,
         std::uint64_t n_loc) {
        const auto rep =
            synth::check(synth::parse_spec(spec_json), seed, make_config(n_exec, n_loc, 0));
        return py::make_tuple(rep.references, rep.mismatches);
      },
      py::arg("spec_json"), py::arg("seed") = 0, py::arg("n_exec") = 20, py::arg("n_loc") = 10,
      "Compare analysis against the oracle; returns (references, mismatches).");

  m.def(
      "random_spec", [](std::uint64_t seed) { return synth::spec_to_json(synth::random_spec(seed)); },
      py::arg("seed"));
  m.def("pointer_walk_spec", [] { return synth::spec_to_json(synth::pointer_walk_spec()); });
  m.def("shared_callee_spec", [] { return synth::spec_to_json(synth::shared_callee_spec()); });
}
