// Copyright 2026 The dlspec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "dlspec/cli.hpp"
#include "dlspec/gate.hpp"
#include "dlspec/orchestrator.hpp"
#include "dlspec/parser.hpp"
#include "dlspec/protocol.hpp"
#include "dlspec/registry.hpp"
#include "dlspec/version.hpp"

namespace py = pybind11;
using namespace dlspec;

namespace {

py::dict violation_dict(const Violation& v) {
  py::dict d;
  d["path"] = v.path;
  d["code"] = v.code;
  d["message"] = v.message;
  d["severity"] = std::string(severity_name(v.severity));
  return d;
}

py::list violation_list(const std::vector<Violation>& vs) {
  py::list out;
  for (const auto& v : vs) out.append(violation_dict(v));
  return out;
}

py::object scalar_object(const Scalar& s) {
  return std::visit([](const auto& x) -> py::object { return py::cast(x); }, s);
}

Manifest parse_checked(const std::string& text) {
  Manifest m = parse_manifest(text);
  auto vs = validate(m);
  if (has_errors(vs)) throw ManifestError(std::move(vs));
  return m;
}

template <typename T>
T parse_as(const std::string& text, Kind kind) {
  Manifest m = parse_checked(text);
  if (manifest_kind(m) != kind) {
    throw Error(Errc::bundle_kinds, "expected a " + std::string(kind_name(kind)) + " manifest, got " +
                                        canonical_id(m));
  }
  return std::get<T>(m);
}

// Buffers bytes and yields complete frame bodies as JSON text.
class PyFrameDecoder {
 public:
  void feed(const py::bytes& data) { dec_.feed(std::string(data)); }
  std::optional<std::string> next() {
    auto m = dec_.next();
    if (!m) return std::nullopt;
    return m->dump();
  }
  std::size_t buffered() const { return dec_.buffered(); }

 private:
  protocol::FrameDecoder dec_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the dlspec manifest library and runtime";

  static PyObject* error_type = py::exception<Error>(m, "Error", PyExc_RuntimeError).ptr();
  static PyObject* manifest_error_type =
      py::exception<ManifestError>(m, "ManifestError", error_type).ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    auto raise = [](PyObject* type, const Error& e, py::list violations) {
      py::object exc = py::reinterpret_borrow<py::object>(type)(py::str(e.what()));
      exc.attr("code") = std::string(errc_name(e.code()));
      exc.attr("violations") = std::move(violations);
      PyErr_SetObject(type, exc.ptr());
    };
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ManifestError& e) {
      raise(manifest_error_type, e, violation_list(e.violations()));
    } catch (const Error& e) {
      raise(error_type, e, py::list());
    }
  });

  m.def("version", [] { return std::string("0.1.0"); });

  m.def("lint", [](const std::string& text) { return violation_list(lint(text)); }, py::arg("text"),
        "Structural and value checks for a manifest or reference log.");
  m.def("canonicalize", [](const std::string& text) { return serialize(parse_manifest(text)); },
        py::arg("text"), "Canonical text of a manifest. Raises ManifestError.");
  m.def("manifest_id", [](const std::string& text) { return canonical_id(parse_manifest(text)); },
        py::arg("text"));
  m.def("peek_kind", [](const std::string& text) { return peek_kind(text); }, py::arg("text"));
  m.def("required_fields", [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& r : required_fields()) out.emplace_back(r.kind, r.path);
    return out;
  });
  m.def("violation_codes", [] {
    std::vector<std::string> out;
    for (auto c : violation_codes()) out.emplace_back(c);
    return out;
  });

  m.def("compare_versions", [](const std::string& a, const std::string& b) {
    const auto c = parse_version(a) <=> parse_version(b);
    return c < 0 ? -1 : (c > 0 ? 1 : 0);
  }, py::arg("a"), py::arg("b"));
  m.def("satisfies", [](const std::string& v, const std::string& range) {
    return parse_range(range).contains(parse_version(v));
  }, py::arg("version"), py::arg("range"));
  m.def("resolve", [](const std::string& registry, const std::string& ref) {
    return canonical_id(Registry(registry).resolve(parse_manifest_ref(ref)));
  }, py::arg("registry"), py::arg("ref"), "Highest stored version satisfying `kind:name@range`.");

  m.def("plan", [](const std::string& hardware, const std::string& software, const std::string& dataset,
                   const std::string& model) {
    TaskBundle b;
    b.hardware = parse_as<HardwareManifest>(hardware, Kind::hardware);
    b.software = parse_as<SoftwareManifest>(software, Kind::software);
    b.dataset = parse_as<DatasetManifest>(dataset, Kind::dataset);
    b.model = parse_as<ModelManifest>(model, Kind::model);
    return plan(b).to_json().dump();
  }, py::arg("hardware"), py::arg("software"), py::arg("dataset"), py::arg("model"),
        "Execution plan for four manifest texts, as JSON text.");

  m.def("probe_host", [] {
    py::dict d;
    for (const auto& [k, v] : probe_host().values) d[py::str(k)] = scalar_object(v);
    return d;
  });

  auto proto = m.def_submodule("protocol", "Worker protocol framing");
  proto.attr("VERSION") = protocol::kVersion;
  proto.attr("MAX_FRAME_BYTES") = protocol::kMaxFrameBytes;
  proto.def("context_keys", [] {
    std::vector<std::string> out;
    for (auto k : protocol::context_keys()) out.emplace_back(k);
    return out;
  });
  proto.def("encode_frame", [](const std::string& message_json) {
    return py::bytes(protocol::encode_frame(protocol::json::parse(message_json)));
  }, py::arg("message_json"));
  proto.def("output_digest", [](const std::string& value) { return protocol::output_digest(value); },
            py::arg("value"), "Digest of a string output.");
  proto.def("output_digest_json", [](const std::string& value_json) {
    return protocol::output_digest(protocol::json::parse(value_json));
  }, py::arg("value_json"), "Digest of a non-string output given as JSON text.");
  py::class_<PyFrameDecoder>(proto, "FrameDecoder")
      .def(py::init<>())
      .def("feed", &PyFrameDecoder::feed)
      .def("next", &PyFrameDecoder::next, "Next complete frame body as JSON text, or None.")
      .def_property_readonly("buffered", &PyFrameDecoder::buffered);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = run_cli(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Runs the command line in-process. Returns (exit_code, stdout, stderr).");
}
