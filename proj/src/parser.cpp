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

#include "dlspec/parser.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>

#include "document.hpp"

namespace dlspec {

using detail::Diagnostics;
using detail::index_path;
using detail::MapReader;
using yaml::Node;

namespace {

constexpr std::string_view kReferenceLogKind = "reference-log";
constexpr std::string_view kReferenceLogSection = "reference_log";

constexpr std::string_view kCodes[] = {
    "syntax-error",       "unsupported-yaml",  "unknown-kind",
    "unknown-key",        "required-missing",  "required-empty",
    "type-mismatch",      "invalid-value",     "invalid-name",
    "invalid-version",    "invalid-url",       "unsupported-scheme",
    "invalid-checksum",   "empty-resources",   "empty-io",
    "duplicate-name",     "invalid-shape",     "invalid-env-key",
    "invalid-constraint", "invalid-pattern",   "invalid-stage",
    "non-finite-metric",  "invalid-timestamp", "duplicate-kind",
    "missing-kind",       "split-task-mismatch",
};

constexpr RequiredField kRequired[] = {
    {"hardware", "kind"},
    {"hardware", "name"},
    {"hardware", "version"},
    {"hardware", "hardware"},
    {"hardware", "hardware.constraints"},
    {"hardware", "hardware.constraints[*].key"},
    {"hardware", "hardware.constraints[*].op"},
    {"hardware", "hardware.constraints[*].value"},
    {"hardware", "hardware.setup[*].argv"},
    {"hardware", "hardware.teardown[*].argv"},
    {"software", "kind"},
    {"software", "name"},
    {"software", "version"},
    {"software", "software"},
    {"software", "software.container_image"},
    {"dataset", "kind"},
    {"dataset", "name"},
    {"dataset", "version"},
    {"dataset", "dataset"},
    {"dataset", "dataset.split"},
    {"dataset", "dataset.resources"},
    {"dataset", "dataset.resources[*].url"},
    {"dataset", "dataset.resources[*].checksum"},
    {"model", "kind"},
    {"model", "name"},
    {"model", "version"},
    {"model", "model"},
    {"model", "model.task_kind"},
    {"model", "model.inputs"},
    {"model", "model.inputs[*].name"},
    {"model", "model.inputs[*].element_type"},
    {"model", "model.outputs"},
    {"model", "model.outputs[*].name"},
    {"model", "model.outputs[*].element_type"},
    {"model", "model.artifacts[*].url"},
    {"model", "model.artifacts[*].checksum"},
    {"model", "model.pre_processing.source"},
    {"model", "model.run"},
    {"model", "model.run.source"},
    {"model", "model.post_processing.source"},
    {"reference-log", "kind"},
    {"reference-log", "reference_log"},
    {"reference-log", "reference_log.bundle"},
    {"reference-log", "reference_log.bundle.hardware"},
    {"reference-log", "reference_log.bundle.software"},
    {"reference-log", "reference_log.bundle.dataset"},
    {"reference-log", "reference_log.bundle.model"},
    {"reference-log", "reference_log.metrics"},
    {"reference-log", "reference_log.created_at"},
};

template <typename E>
std::optional<E> read_enum(const Node* n, const std::string& path,
                           std::optional<E> (*parse)(std::string_view) noexcept,
                           std::string_view allowed, Diagnostics& diag) {
  auto s = detail::read_string(n, path, diag);
  if (!s) return std::nullopt;
  auto v = parse(*s);
  if (!v) {
    diag.add(path, "invalid-value",
             "'" + *s + "' is not one of " + std::string(allowed));
  }
  return v;
}

// ---------------------------------------------------------------------------
// Reading

void read_id(MapReader& root, Kind kind, ManifestId& id, Diagnostics& diag) {
  id.kind = kind;
  if (auto name = detail::read_string(root.required("name"), "name", diag)) {
    id.name = *name;
  }
  if (auto v = detail::read_string(root.required("version"), "version", diag)) {
    try {
      id.version = parse_version(*v);
    } catch (const Error& e) {
      diag.add("version", "invalid-version", e.what());
    }
  }
}

ResourceRef read_resource(const Node& n, const std::string& path,
                          Diagnostics& diag) {
  ResourceRef r;
  MapReader map(&n, path, diag);
  if (auto url = detail::read_string(map.required("url"), map.child("url"), diag)) {
    r.url = *url;
  }
  if (auto c = detail::read_string(map.required("checksum"),
                                   map.child("checksum"), diag)) {
    try {
      r.checksum = parse_checksum(*c);
    } catch (const Error& e) {
      diag.add(map.child("checksum"), "invalid-checksum", e.what());
    }
  }
  if (const Node* u = map.optional("unpack")) {
    if (auto v = read_enum<Unpack>(u, map.child("unpack"), parse_unpack,
                                   "{none, tar, tar.gz, zip}", diag)) {
      r.unpack = *v;
    }
  }
  map.finish();
  return r;
}

std::vector<ResourceRef> read_resources(const Node* n, const std::string& path,
                                        Diagnostics& diag) {
  std::vector<ResourceRef> out;
  if (const Node* seq = detail::read_sequence(n, path, diag)) {
    for (std::size_t i = 0; i < seq->items().size(); ++i) {
      out.push_back(read_resource(seq->items()[i], index_path(path, i), diag));
    }
  }
  return out;
}

ConstraintValue read_constraint_value(const Node& n, const std::string& path,
                                      Diagnostics& diag) {
  if (n.is_sequence()) {
    std::vector<Scalar> items;
    for (std::size_t i = 0; i < n.items().size(); ++i) {
      if (auto s = detail::read_scalar(&n.items()[i], index_path(path, i), diag)) {
        items.push_back(*s);
      }
    }
    return items;
  }
  if (auto s = detail::read_scalar(&n, path, diag)) return *s;
  return Scalar{std::string()};
}

std::vector<SetupCommand> read_commands(const Node* n, const std::string& path,
                                        Diagnostics& diag) {
  std::vector<SetupCommand> out;
  const Node* seq = detail::read_sequence(n, path, diag);
  if (!seq) return out;
  for (std::size_t i = 0; i < seq->items().size(); ++i) {
    SetupCommand cmd;
    MapReader map(&seq->items()[i], index_path(path, i), diag);
    cmd.argv = detail::read_string_list(map.required("argv"), map.child("argv"),
                                        diag);
    if (const Node* m = map.optional("must_succeed")) {
      if (auto b = detail::read_bool(m, map.child("must_succeed"), diag)) {
        cmd.must_succeed = *b;
      }
    }
    if (auto d = detail::read_string(map.optional("description"),
                                     map.child("description"), diag)) {
      cmd.description = *d;
    }
    map.finish();
    out.push_back(std::move(cmd));
  }
  return out;
}

HardwareManifest read_hardware(MapReader& root, Diagnostics& diag) {
  HardwareManifest m;
  read_id(root, Kind::hardware, m.id, diag);
  MapReader sec(root.required("hardware"), "hardware", diag);
  if (const Node* seq = detail::read_sequence(sec.required("constraints"),
                                              sec.child("constraints"), diag)) {
    for (std::size_t i = 0; i < seq->items().size(); ++i) {
      Constraint c;
      MapReader map(&seq->items()[i], index_path(sec.child("constraints"), i),
                    diag);
      if (auto k = detail::read_string(map.required("key"), map.child("key"), diag)) {
        c.key = *k;
      }
      if (auto op = read_enum<ConstraintOp>(map.required("op"), map.child("op"),
                                            parse_constraint_op,
                                            "{eq, ne, ge, le, in, matches}",
                                            diag)) {
        c.op = *op;
      }
      if (const Node* v = map.required("value")) {
        c.value = read_constraint_value(*v, map.child("value"), diag);
      }
      map.finish();
      m.constraints.push_back(std::move(c));
    }
  }
  m.setup = read_commands(sec.optional("setup"), sec.child("setup"), diag);
  m.teardown = read_commands(sec.optional("teardown"), sec.child("teardown"), diag);
  sec.finish();
  return m;
}

SoftwareManifest read_software(MapReader& root, Diagnostics& diag) {
  SoftwareManifest m;
  read_id(root, Kind::software, m.id, diag);
  MapReader sec(root.required("software"), "software", diag);
  if (auto img = detail::read_string(sec.required("container_image"),
                                     sec.child("container_image"), diag)) {
    m.container_image = *img;
  }
  m.env = detail::read_string_map(sec.optional("env"), sec.child("env"), diag);
  m.framework = detail::read_string_map(sec.optional("framework"),
                                        sec.child("framework"), diag);
  sec.finish();
  return m;
}

DatasetManifest read_dataset(MapReader& root, Diagnostics& diag) {
  DatasetManifest m;
  read_id(root, Kind::dataset, m.id, diag);
  MapReader sec(root.required("dataset"), "dataset", diag);
  if (auto s = read_enum<Split>(sec.required("split"), sec.child("split"),
                                parse_split, "{training, validation, test}",
                                diag)) {
    m.split = *s;
  }
  m.resources = read_resources(sec.required("resources"),
                               sec.child("resources"), diag);
  if (auto g = detail::read_string(sec.optional("element_listing"),
                                   sec.child("element_listing"), diag)) {
    m.element_listing.glob = *g;
  }
  sec.finish();
  return m;
}

std::vector<IOSpec> read_io(const Node* n, const std::string& path,
                            Diagnostics& diag) {
  std::vector<IOSpec> out;
  const Node* seq = detail::read_sequence(n, path, diag);
  if (!seq) return out;
  for (std::size_t i = 0; i < seq->items().size(); ++i) {
    IOSpec io;
    MapReader map(&seq->items()[i], index_path(path, i), diag);
    if (auto s = detail::read_string(map.required("name"), map.child("name"), diag)) {
      io.name = *s;
    }
    if (auto t = read_enum<ElementType>(
            map.required("element_type"), map.child("element_type"),
            parse_element_type,
            "{float32, float64, int32, int64, uint8, string, bytes}", diag)) {
      io.element_type = *t;
    }
    if (const Node* shape = detail::read_sequence(map.optional("shape"),
                                                  map.child("shape"), diag)) {
      std::vector<Dim> dims;
      for (std::size_t d = 0; d < shape->items().size(); ++d) {
        const Node& dim = shape->items()[d];
        const std::string dpath = index_path(map.child("shape"), d);
        auto v = dim.resolved();
        if (v && std::holds_alternative<std::string>(*v) &&
            std::get<std::string>(*v) == "*") {
          dims.emplace_back(std::nullopt);
        } else if (v && std::holds_alternative<std::int64_t>(*v)) {
          dims.emplace_back(std::get<std::int64_t>(*v));
        } else {
          diag.add(dpath, "invalid-shape",
                   "dimension must be a positive integer or \"*\"");
        }
      }
      io.shape = std::move(dims);
    }
    if (const Node* l = map.optional("layout")) {
      io.layout = detail::read_string(l, map.child("layout"), diag);
    }
    map.finish();
    out.push_back(std::move(io));
  }
  return out;
}

std::optional<StageCode> read_stage(const Node* n, const std::string& path,
                                    Diagnostics& diag) {
  if (!n) return std::nullopt;
  StageCode code;
  MapReader map(n, path, diag);
  if (!map.ok()) return std::nullopt;
  if (auto lang = detail::read_string(map.optional("language"),
                                      map.child("language"), diag)) {
    code.language = *lang;
  }
  if (auto src = detail::read_string(map.required("source"), map.child("source"),
                                     diag)) {
    code.source = *src;
  }
  map.finish();
  return code;
}

ModelManifest read_model(MapReader& root, Diagnostics& diag) {
  ModelManifest m;
  read_id(root, Kind::model, m.id, diag);
  MapReader sec(root.required("model"), "model", diag);
  if (auto k = read_enum<TaskKind>(sec.required("task_kind"),
                                   sec.child("task_kind"), parse_task_kind,
                                   "{inference, training}", diag)) {
    m.task_kind = *k;
  }
  m.inputs = read_io(sec.required("inputs"), sec.child("inputs"), diag);
  m.outputs = read_io(sec.required("outputs"), sec.child("outputs"), diag);
  m.artifacts = read_resources(sec.optional("artifacts"), sec.child("artifacts"),
                               diag);
  if (auto s = read_stage(sec.optional("pre_processing"),
                          sec.child("pre_processing"), diag)) {
    m.pre_processing = std::move(*s);
  }
  if (auto s = read_stage(sec.required("run"), sec.child("run"), diag)) {
    m.run = std::move(*s);
  }
  if (auto s = read_stage(sec.optional("post_processing"),
                          sec.child("post_processing"), diag)) {
    m.post_processing = std::move(*s);
  }
  m.hyperparameters = detail::read_scalar_map(
      sec.optional("hyperparameters"), sec.child("hyperparameters"), diag);
  sec.finish();
  return m;
}

std::optional<Manifest> read_manifest(const Node& root, Diagnostics& diag) {
  MapReader reader(&root, "", diag);
  if (!reader.ok()) return std::nullopt;
  auto kind_text = detail::read_string(reader.required("kind"), "kind", diag);
  if (!kind_text) return std::nullopt;
  auto kind = parse_kind(*kind_text);
  if (!kind) {
    diag.add("kind", "unknown-kind",
             "unknown manifest kind '" + *kind_text +
                 "', expected one of {hardware, software, dataset, model}");
    return std::nullopt;
  }
  std::optional<Manifest> out;
  switch (*kind) {
    case Kind::hardware: out = read_hardware(reader, diag); break;
    case Kind::software: out = read_software(reader, diag); break;
    case Kind::dataset: out = read_dataset(reader, diag); break;
    case Kind::model: out = read_model(reader, diag); break;
  }
  reader.finish();
  return out;
}

std::optional<ReferenceLog> read_reference_log(const Node& root,
                                               Diagnostics& diag) {
  MapReader reader = detail::open_document(root, kReferenceLogKind, diag);
  if (!reader.ok()) return std::nullopt;
  ReferenceLog log;
  MapReader sec(reader.required(kReferenceLogSection),
                std::string(kReferenceLogSection), diag);
  MapReader bundle(sec.required("bundle"), sec.child("bundle"), diag);
  for (Kind k : kAllKinds) {
    const std::string path = bundle.child(kind_name(k));
    if (auto s = detail::read_string(bundle.required(kind_name(k)), path, diag)) {
      try {
        ManifestId id = parse_manifest_id(*s);
        if (id.kind != k) {
          diag.add(path, "invalid-value",
                   "id '" + *s + "' is not a " + std::string(kind_name(k)) +
                       " id");
        }
        log.bundle.at(k) = std::move(id);
      } catch (const Error& e) {
        diag.add(path, "invalid-value", e.what());
      }
    }
  }
  bundle.finish();
  MapReader metrics(sec.required("metrics"), sec.child("metrics"), diag);
  for (const auto& e : metrics.entries()) {
    if (auto v = detail::read_number(&e.value, metrics.child(e.key), diag)) {
      log.metrics.emplace(e.key, *v);
    }
  }
  if (const Node* eo = sec.optional("expected_outputs")) {
    if (auto s = detail::read_string(eo, sec.child("expected_outputs"), diag)) {
      try {
        log.expected_outputs = parse_checksum(*s);
      } catch (const Error& e) {
        diag.add(sec.child("expected_outputs"), "invalid-checksum", e.what());
      }
    }
  }
  log.author_info = detail::read_scalar_map(sec.optional("author_info"),
                                            sec.child("author_info"), diag);
  if (auto ts = detail::read_string(sec.required("created_at"),
                                    sec.child("created_at"), diag)) {
    log.created_at = *ts;
  }
  sec.finish();
  reader.finish();
  return log;
}

// ---------------------------------------------------------------------------
// Writing

Node header(std::string_view kind) {
  Node root = Node::mapping();
  root.set("kind", Node::scalar(std::string(kind)));
  return root;
}

Node manifest_header(const ManifestId& id) {
  Node root = header(kind_name(id.kind));
  root.set("name", Node::scalar(id.name));
  root.set("version", Node::scalar(id.version.to_string()));
  return root;
}

Node resource_node(const ResourceRef& r) {
  Node n = Node::mapping();
  n.set("url", Node::scalar(r.url));
  n.set("checksum", Node::scalar(r.checksum.to_string()));
  n.set("unpack", Node::scalar(std::string(unpack_name(r.unpack))));
  return n;
}

Node resources_node(const std::vector<ResourceRef>& rs) {
  Node seq = Node::sequence();
  for (const auto& r : rs) seq.push_back(resource_node(r));
  return seq;
}

Node commands_node(const std::vector<SetupCommand>& cmds) {
  Node seq = Node::sequence();
  for (const auto& c : cmds) {
    Node n = Node::mapping();
    n.set("argv", detail::string_list_node(c.argv));
    n.set("must_succeed", Node::from(Scalar{c.must_succeed}));
    n.set("description", Node::scalar(c.description));
    seq.push_back(std::move(n));
  }
  return seq;
}

Node constraint_value_node(const ConstraintValue& v) {
  if (const auto* list = std::get_if<std::vector<Scalar>>(&v)) {
    Node seq = Node::sequence();
    for (const auto& s : *list) seq.push_back(Node::from(s));
    return seq;
  }
  return Node::from(std::get<Scalar>(v));
}

Node io_node(const std::vector<IOSpec>& ios) {
  Node seq = Node::sequence();
  for (const auto& io : ios) {
    Node n = Node::mapping();
    n.set("name", Node::scalar(io.name));
    n.set("element_type",
          Node::scalar(std::string(element_type_name(io.element_type))));
    if (io.shape) {
      Node dims = Node::sequence();
      for (const Dim& d : *io.shape) {
        dims.push_back(d ? Node::from(Scalar{*d}) : Node::scalar("*"));
      }
      n.set("shape", std::move(dims));
    }
    if (io.layout) n.set("layout", Node::scalar(*io.layout));
    seq.push_back(std::move(n));
  }
  return seq;
}

Node stage_node(const StageCode& s) {
  Node n = Node::mapping();
  n.set("language", Node::scalar(s.language));
  n.set("source", Node::scalar(s.source));
  return n;
}

Node to_node(const HardwareManifest& m) {
  Node root = manifest_header(m.id);
  Node sec = Node::mapping();
  Node constraints = Node::sequence();
  for (const auto& c : m.constraints) {
    Node n = Node::mapping();
    n.set("key", Node::scalar(c.key));
    n.set("op", Node::scalar(std::string(constraint_op_name(c.op))));
    n.set("value", constraint_value_node(c.value));
    constraints.push_back(std::move(n));
  }
  sec.set("constraints", std::move(constraints));
  sec.set("setup", commands_node(m.setup));
  sec.set("teardown", commands_node(m.teardown));
  root.set("hardware", std::move(sec));
  return root;
}

Node to_node(const SoftwareManifest& m) {
  Node root = manifest_header(m.id);
  Node sec = Node::mapping();
  sec.set("container_image", Node::scalar(m.container_image));
  sec.set("env", detail::string_map_node(m.env));
  sec.set("framework", detail::string_map_node(m.framework));
  root.set("software", std::move(sec));
  return root;
}

Node to_node(const DatasetManifest& m) {
  Node root = manifest_header(m.id);
  Node sec = Node::mapping();
  sec.set("split", Node::scalar(std::string(split_name(m.split))));
  sec.set("resources", resources_node(m.resources));
  sec.set("element_listing", Node::scalar(m.element_listing.glob));
  root.set("dataset", std::move(sec));
  return root;
}

Node to_node(const ModelManifest& m) {
  Node root = manifest_header(m.id);
  Node sec = Node::mapping();
  sec.set("task_kind", Node::scalar(std::string(task_kind_name(m.task_kind))));
  sec.set("inputs", io_node(m.inputs));
  sec.set("outputs", io_node(m.outputs));
  sec.set("artifacts", resources_node(m.artifacts));
  sec.set("pre_processing", stage_node(m.pre_processing));
  sec.set("run", stage_node(m.run));
  sec.set("post_processing", stage_node(m.post_processing));
  sec.set("hyperparameters", detail::scalar_map_node(m.hyperparameters));
  root.set("model", std::move(sec));
  return root;
}

// ---------------------------------------------------------------------------
// Validation

bool valid_url(std::string_view url) {
  const auto pos = url.find("://");
  if (pos == std::string_view::npos || pos == 0) return false;
  std::string_view rest = url.substr(pos + 3);
  if (rest.empty()) return false;
  if (url_scheme(url) == "file") {
    if (rest.starts_with("localhost/")) rest.remove_prefix(9);
    return rest.starts_with('/');
  }
  return rest.front() != '/';
}

void check_resource(const ResourceRef& r, const std::string& path,
                    Diagnostics& diag) {
  if (r.url.empty()) {
    diag.add(detail::key_path(path, "url"), "required-empty", "url is empty");
    return;
  }
  const std::string scheme = url_scheme(r.url);
  const std::string path_url = detail::key_path(path, "url");
  if (scheme.empty()) {
    diag.add(path_url, "invalid-url", "'" + r.url + "' has no scheme");
  } else if (scheme != "http" && scheme != "https" && scheme != "ftp" &&
             scheme != "file") {
    diag.add(path_url, "unsupported-scheme",
             "scheme '" + scheme + "' is not one of {http, https, ftp, file}");
  } else if (!valid_url(r.url)) {
    diag.add(path_url, "invalid-url",
             "'" + r.url + "' is not a valid resource url");
  }
}

void check_id(const ManifestId& id, Diagnostics& diag) {
  if (id.name.empty()) {
    diag.add("name", "required-empty", "name is empty");
  } else if (!is_valid_manifest_name(id.name)) {
    diag.add("name", "invalid-name",
             "name '" + id.name + "' must match [a-z0-9_.-]+");
  }
}

void check_commands(const std::vector<SetupCommand>& cmds,
                    const std::string& path, Diagnostics& diag) {
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    const auto& argv = cmds[i].argv;
    if (argv.empty() || argv.front().empty()) {
      diag.add(detail::key_path(index_path(path, i), "argv"), "required-empty",
               "command vector is empty");
    }
  }
}

void check(const HardwareManifest& m, Diagnostics& diag) {
  std::set<std::string> keys;
  for (std::size_t i = 0; i < m.constraints.size(); ++i) {
    const Constraint& c = m.constraints[i];
    const std::string path = index_path("hardware.constraints", i);
    if (c.key.empty()) {
      diag.add(path + ".key", "required-empty", "constraint key is empty");
    } else if (!keys.insert(c.key).second) {
      diag.add(path + ".key", "duplicate-name",
               "constraint key '" + c.key + "' appears more than once");
    }
    const bool is_list = std::holds_alternative<std::vector<Scalar>>(c.value);
    switch (c.op) {
      case ConstraintOp::in:
        if (!is_list) {
          diag.add(path + ".value", "invalid-constraint",
                   "'in' requires a list value");
        }
        break;
      case ConstraintOp::matches: {
        const auto* s = is_list ? nullptr : &std::get<Scalar>(c.value);
        if (!s || !std::holds_alternative<std::string>(*s)) {
          diag.add(path + ".value", "invalid-constraint",
                   "'matches' requires a pattern string");
          break;
        }
        try {
          std::regex re(std::get<std::string>(*s));
        } catch (const std::regex_error&) {
          diag.add(path + ".value", "invalid-pattern",
                   "'" + std::get<std::string>(*s) + "' is not a valid pattern");
        }
        break;
      }
      case ConstraintOp::ge:
      case ConstraintOp::le:
        if (is_list || !scalar_is_numeric(std::get<Scalar>(c.value))) {
          diag.add(path + ".value", "invalid-constraint",
                   std::string(constraint_op_name(c.op)) +
                       " requires a numeric value");
        }
        break;
      case ConstraintOp::eq:
      case ConstraintOp::ne:
        if (is_list) {
          diag.add(path + ".value", "invalid-constraint",
                   std::string(constraint_op_name(c.op)) +
                       " requires a scalar value");
        }
        break;
    }
  }
  check_commands(m.setup, "hardware.setup", diag);
  check_commands(m.teardown, "hardware.teardown", diag);
}

void check(const SoftwareManifest& m, Diagnostics& diag) {
  static const std::regex env_key("[A-Z_][A-Z0-9_]*");
  if (m.container_image.empty()) {
    diag.add("software.container_image", "required-empty",
             "container_image is empty");
  }
  for (const auto& [k, v] : m.env) {
    if (!std::regex_match(k, env_key)) {
      diag.add("software.env." + k, "invalid-env-key",
               "environment key '" + k + "' must match [A-Z_][A-Z0-9_]*");
    }
  }
}

void check(const DatasetManifest& m, Diagnostics& diag) {
  if (m.resources.empty()) {
    diag.add("dataset.resources", "empty-resources",
             "a dataset needs at least one resource");
  }
  for (std::size_t i = 0; i < m.resources.size(); ++i) {
    check_resource(m.resources[i], index_path("dataset.resources", i), diag);
  }
  if (m.element_listing.glob.empty()) {
    diag.add("dataset.element_listing", "required-empty",
             "element_listing glob is empty");
  }
}

void check_io(const std::vector<IOSpec>& ios, const std::string& path,
              Diagnostics& diag) {
  std::set<std::string> names;
  for (std::size_t i = 0; i < ios.size(); ++i) {
    const std::string p = index_path(path, i);
    if (ios[i].name.empty()) {
      diag.add(p + ".name", "required-empty", "name is empty");
    } else if (!names.insert(ios[i].name).second) {
      diag.add(p + ".name", "duplicate-name",
               "name '" + ios[i].name + "' appears more than once");
    }
    if (ios[i].shape) {
      for (std::size_t d = 0; d < ios[i].shape->size(); ++d) {
        const Dim& dim = (*ios[i].shape)[d];
        if (dim && *dim <= 0) {
          diag.add(index_path(p + ".shape", d), "invalid-shape",
                   "dimension must be a positive integer or \"*\"");
        }
      }
    }
  }
}

void check_stage(const StageCode& s, const std::string& path, Diagnostics& diag) {
  static const std::regex entry(R"((^|\n)def fun\(\s*ctx\s*,\s*data\s*\)\s*:)");
  if (s.language != kStageLanguage) {
    diag.add(path + ".language", "invalid-value",
             "stage language must be '" + std::string(kStageLanguage) + "'");
  }
  if (s.source.empty()) {
    diag.add(path + ".source", "required-empty", "stage source is empty");
  } else if (!std::regex_search(s.source, entry)) {
    diag.add(path + ".source", "invalid-stage",
             "stage source must define a top-level fun(ctx, data)");
  }
}

void check(const ModelManifest& m, Diagnostics& diag) {
  if (m.task_kind == TaskKind::inference) {
    if (m.inputs.empty()) {
      diag.add("model.inputs", "empty-io", "inference models need inputs");
    }
    if (m.outputs.empty()) {
      diag.add("model.outputs", "empty-io", "inference models need outputs");
    }
  }
  check_io(m.inputs, "model.inputs", diag);
  check_io(m.outputs, "model.outputs", diag);
  for (std::size_t i = 0; i < m.artifacts.size(); ++i) {
    check_resource(m.artifacts[i], index_path("model.artifacts", i), diag);
  }
  for (Stage s : kAllStages) {
    check_stage(m.stage(s), "model." + std::string(stage_name(s)), diag);
  }
}

bool covered(const std::string& path, const std::vector<Violation>& existing) {
  for (const auto& v : existing) {
    if (v.path.empty()) continue;
    if (path == v.path || path.starts_with(v.path + ".") ||
        path.starts_with(v.path + "[")) {
      return true;
    }
  }
  return false;
}

}  // namespace

std::string_view severity_name(Severity s) noexcept {
  return s == Severity::error ? "error" : "warning";
}

std::span<const std::string_view> violation_codes() noexcept { return kCodes; }

bool has_errors(std::span<const Violation> violations) noexcept {
  return std::any_of(violations.begin(), violations.end(), [](const Violation& v) {
    return v.severity == Severity::error;
  });
}

ManifestError::ManifestError(std::vector<Violation> violations)
    : Error(Errc::invalid_manifest,
            violations.empty()
                ? std::string("invalid document")
                : (violations.front().path.empty()
                       ? violations.front().message
                       : violations.front().path + ": " +
                             violations.front().message)),
      violations_(std::move(violations)) {}

Manifest parse_manifest(std::string_view text) {
  Diagnostics diag;
  auto tree = detail::parse_tree(text, diag);
  std::optional<Manifest> m;
  if (tree) m = read_manifest(*tree, diag);
  detail::throw_if_errors(diag);
  return std::move(*m);
}

ReferenceLog parse_reference_log(std::string_view text) {
  Diagnostics diag;
  auto tree = detail::parse_tree(text, diag);
  std::optional<ReferenceLog> log;
  if (tree) log = read_reference_log(*tree, diag);
  detail::throw_if_errors(diag);
  return std::move(*log);
}

std::vector<Violation> validate(const Manifest& manifest) {
  Diagnostics diag;
  check_id(manifest_id(manifest), diag);
  std::visit([&](const auto& m) { check(m, diag); }, manifest);
  auto out = diag.take();
  detail::sort_by_path(out);
  return out;
}

std::vector<Violation> validate(const ReferenceLog& log) {
  Diagnostics diag;
  for (const auto& [name, value] : log.metrics) {
    if (!std::isfinite(value)) {
      diag.add("reference_log.metrics." + name, "non-finite-metric",
               "metric '" + name + "' is not a finite number");
    }
  }
  if (!is_valid_timestamp(log.created_at)) {
    diag.add("reference_log.created_at", "invalid-timestamp",
             "'" + log.created_at + "' is not a UTC timestamp");
  }
  auto out = diag.take();
  detail::sort_by_path(out);
  return out;
}

std::string serialize(const Manifest& manifest) {
  return yaml::emit(std::visit([](const auto& m) { return to_node(m); }, manifest));
}

std::string serialize(const ReferenceLog& log) {
  Node root = header(kReferenceLogKind);
  Node sec = Node::mapping();
  Node bundle = Node::mapping();
  for (Kind k : kAllKinds) {
    bundle.set(std::string(kind_name(k)), Node::scalar(log.bundle.at(k).to_string()));
  }
  sec.set("bundle", std::move(bundle));
  Node metrics = Node::mapping();
  for (const auto& [k, v] : log.metrics) metrics.set(k, Node::from(Scalar{v}));
  sec.set("metrics", std::move(metrics));
  if (log.expected_outputs) {
    sec.set("expected_outputs", Node::scalar(log.expected_outputs->to_string()));
  }
  sec.set("author_info", detail::scalar_map_node(log.author_info));
  sec.set("created_at", Node::scalar(log.created_at));
  root.set(std::string(kReferenceLogSection), std::move(sec));
  return yaml::emit(root);
}

std::vector<Violation> validate_bundle(const TaskBundle& bundle) {
  Diagnostics diag;
  if (bundle.model.task_kind == TaskKind::training &&
      bundle.dataset.split == Split::test) {
    diag.add("dataset.split", "split-task-mismatch",
             "training model " + bundle.model.id.to_string() +
                 " is paired with test split dataset " +
                 bundle.dataset.id.to_string(),
             Severity::warning);
  }
  return diag.take();
}

std::vector<Violation> validate_composition(std::span<const Manifest> manifests) {
  Diagnostics diag;
  std::map<Kind, std::vector<const Manifest*>> by_kind;
  for (const auto& m : manifests) by_kind[manifest_kind(m)].push_back(&m);
  bool complete = true;
  for (Kind k : kAllKinds) {
    const auto& list = by_kind[k];
    if (list.empty()) {
      diag.add(std::string(kind_name(k)), "missing-kind",
               "no " + std::string(kind_name(k)) + " manifest in the bundle");
      complete = false;
    } else if (list.size() > 1) {
      diag.add(std::string(kind_name(k)), "duplicate-kind",
               std::to_string(list.size()) + " " + std::string(kind_name(k)) +
                   " manifests in the bundle");
      complete = false;
    }
  }
  if (complete) {
    TaskBundle b{std::get<HardwareManifest>(*by_kind[Kind::hardware].front()),
                 std::get<SoftwareManifest>(*by_kind[Kind::software].front()),
                 std::get<DatasetManifest>(*by_kind[Kind::dataset].front()),
                 std::get<ModelManifest>(*by_kind[Kind::model].front())};
    for (auto& v : validate_bundle(b)) diag.items().push_back(std::move(v));
  }
  auto out = diag.take();
  detail::sort_by_path(out);
  return out;
}

std::vector<Violation> lint(std::string_view text) {
  Diagnostics diag;
  auto tree = detail::parse_tree(text, diag);
  if (!tree) return diag.take();

  std::vector<Violation> semantic;
  const Node* kind = tree->is_mapping() ? tree->find("kind") : nullptr;
  if (kind && kind->is_scalar() && kind->value() == kReferenceLogKind) {
    if (auto log = read_reference_log(*tree, diag)) semantic = validate(*log);
  } else if (auto m = read_manifest(*tree, diag)) {
    semantic = validate(*m);
  }
  auto out = diag.take();
  for (auto& v : semantic) {
    if (!covered(v.path, out)) out.push_back(std::move(v));
  }
  detail::sort_by_path(out);
  return out;
}

std::string peek_kind(std::string_view text) {
  try {
    Node root = yaml::parse(text);
    if (const Node* k = root.is_mapping() ? root.find("kind") : nullptr) {
      if (k->is_scalar()) return k->value();
    }
  } catch (const Error&) {
  }
  return {};
}

std::span<const RequiredField> required_fields() noexcept { return kRequired; }

}  // namespace dlspec
