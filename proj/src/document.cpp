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

#include "document.hpp"

#include <algorithm>

namespace dlspec::detail {

namespace {

std::string_view type_label(const yaml::Node& n) {
  switch (n.type()) {
    case yaml::Node::Type::null: return "null";
    case yaml::Node::Type::scalar: return "scalar";
    case yaml::Node::Type::sequence: return "sequence";
    case yaml::Node::Type::mapping: return "mapping";
  }
  return "?";
}

std::string_view scalar_label(const Scalar& s) {
  switch (s.index()) {
    case 0: return "boolean";
    case 1: return "integer";
    case 2: return "float";
    default: return "string";
  }
}

void mismatch(const std::string& path, std::string_view expected,
              std::string_view got, Diagnostics& diag) {
  diag.add(path, "type-mismatch",
           "expected " + std::string(expected) + ", got " + std::string(got));
}

}  // namespace

std::string key_path(std::string_view parent, std::string_view key) {
  if (parent.empty()) return std::string(key);
  std::string out(parent);
  out += '.';
  out += key;
  return out;
}

std::string index_path(std::string_view parent, std::size_t index) {
  return std::string(parent) + "[" + std::to_string(index) + "]";
}

void Diagnostics::add(std::string path, std::string_view code,
                      std::string message, Severity severity) {
  items_.push_back(
      Violation{std::move(path), std::string(code), std::move(message), severity});
}

bool Diagnostics::has_errors() const noexcept {
  return dlspec::has_errors(items_);
}

std::vector<Violation> Diagnostics::take() {
  std::vector<Violation> out = std::move(items_);
  items_.clear();
  return out;
}

MapReader::MapReader(const yaml::Node* node, std::string path,
                     Diagnostics& diag)
    : node_(node), path_(std::move(path)), diag_(diag) {
  if (node_ != nullptr && !node_->is_mapping()) {
    mismatch(path_, "mapping", type_label(*node_), diag_);
    node_ = nullptr;
  }
}

const yaml::Node* MapReader::required(std::string_view key) {
  if (!node_) return nullptr;
  seen_.emplace(key);
  const yaml::Node* v = node_->find(key);
  if (!v) {
    diag_.add(child(key), "required-missing",
              "required field '" + std::string(key) + "' is missing");
  }
  return v;
}

const yaml::Node* MapReader::optional(std::string_view key) {
  if (!node_) return nullptr;
  seen_.emplace(key);
  return node_->find(key);
}

void MapReader::finish() {
  if (!node_) return;
  for (const auto& e : node_->entries()) {
    if (seen_.find(e.key) == seen_.end()) {
      diag_.add(child(e.key), "unknown-key",
                "unknown key '" + e.key + "' (line " +
                    std::to_string(e.key_mark.line) + ")");
    }
  }
}

const std::vector<yaml::Node::Entry>& MapReader::entries() const {
  static const std::vector<yaml::Node::Entry> empty;
  return node_ ? node_->entries() : empty;
}

std::optional<std::string> read_string(const yaml::Node* n,
                                       const std::string& path,
                                       Diagnostics& diag) {
  if (!n) return std::nullopt;
  if (n->is_null()) return std::string();
  if (!n->is_scalar()) {
    mismatch(path, "string", type_label(*n), diag);
    return std::nullopt;
  }
  return n->value();
}

std::optional<bool> read_bool(const yaml::Node* n, const std::string& path,
                              Diagnostics& diag) {
  if (!n) return std::nullopt;
  auto v = n->resolved();
  if (v && std::holds_alternative<bool>(*v)) return std::get<bool>(*v);
  mismatch(path, "boolean", v ? scalar_label(*v) : type_label(*n), diag);
  return std::nullopt;
}

std::optional<double> read_number(const yaml::Node* n, const std::string& path,
                                  Diagnostics& diag) {
  if (!n) return std::nullopt;
  auto v = n->resolved();
  if (v && scalar_is_numeric(*v)) return scalar_number(*v);
  mismatch(path, "number", v ? scalar_label(*v) : type_label(*n), diag);
  return std::nullopt;
}

std::optional<std::int64_t> read_int(const yaml::Node* n,
                                     const std::string& path,
                                     Diagnostics& diag) {
  if (!n) return std::nullopt;
  auto v = n->resolved();
  if (v && std::holds_alternative<std::int64_t>(*v)) {
    return std::get<std::int64_t>(*v);
  }
  mismatch(path, "integer", v ? scalar_label(*v) : type_label(*n), diag);
  return std::nullopt;
}

std::optional<Scalar> read_scalar(const yaml::Node* n, const std::string& path,
                                  Diagnostics& diag) {
  if (!n) return std::nullopt;
  auto v = n->resolved();
  if (!v) mismatch(path, "scalar", type_label(*n), diag);
  return v;
}

const yaml::Node* read_sequence(const yaml::Node* n, const std::string& path,
                                Diagnostics& diag) {
  if (!n) return nullptr;
  if (!n->is_sequence()) {
    mismatch(path, "sequence", type_label(*n), diag);
    return nullptr;
  }
  return n;
}

std::vector<std::string> read_string_list(const yaml::Node* n,
                                          const std::string& path,
                                          Diagnostics& diag) {
  std::vector<std::string> out;
  if (const yaml::Node* seq = read_sequence(n, path, diag)) {
    for (std::size_t i = 0; i < seq->items().size(); ++i) {
      if (auto s = read_string(&seq->items()[i], index_path(path, i), diag)) {
        out.push_back(std::move(*s));
      }
    }
  }
  return out;
}

std::map<std::string, std::string> read_string_map(const yaml::Node* n,
                                                   const std::string& path,
                                                   Diagnostics& diag) {
  std::map<std::string, std::string> out;
  MapReader map(n, path, diag);
  for (const auto& e : map.entries()) {
    if (auto s = read_string(&e.value, map.child(e.key), diag)) {
      out.emplace(e.key, std::move(*s));
    }
  }
  return out;
}

std::map<std::string, Scalar> read_scalar_map(const yaml::Node* n,
                                              const std::string& path,
                                              Diagnostics& diag) {
  std::map<std::string, Scalar> out;
  MapReader map(n, path, diag);
  for (const auto& e : map.entries()) {
    if (auto s = read_scalar(&e.value, map.child(e.key), diag)) {
      out.emplace(e.key, std::move(*s));
    }
  }
  return out;
}

std::optional<yaml::Node> parse_tree(std::string_view text, Diagnostics& diag) {
  try {
    return yaml::parse(text);
  } catch (const yaml::ParseError& e) {
    diag.add("", e.unsupported() ? "unsupported-yaml" : "syntax-error",
             "line " + std::to_string(e.mark().line) + ", column " +
                 std::to_string(e.mark().column) + ": " + e.what());
  }
  return std::nullopt;
}

MapReader open_document(const yaml::Node& root, std::string_view expected,
                        Diagnostics& diag) {
  MapReader reader(&root, "", diag);
  if (!reader.ok()) return reader;
  auto kind = read_string(reader.required("kind"), "kind", diag);
  if (kind && *kind != expected) {
    diag.add("kind", "unknown-kind",
             "expected kind '" + std::string(expected) + "', got '" + *kind +
                 "'");
  }
  return reader;
}

void throw_if_errors(Diagnostics& diag) {
  if (diag.has_errors()) {
    auto v = diag.take();
    sort_by_path(v);
    throw ManifestError(std::move(v));
  }
}

yaml::Node string_map_node(const std::map<std::string, std::string>& m) {
  yaml::Node n = yaml::Node::mapping();
  for (const auto& [k, v] : m) n.set(k, yaml::Node::scalar(v));
  return n;
}

yaml::Node scalar_map_node(const std::map<std::string, Scalar>& m) {
  yaml::Node n = yaml::Node::mapping();
  for (const auto& [k, v] : m) n.set(k, yaml::Node::from(v));
  return n;
}

yaml::Node string_list_node(const std::vector<std::string>& items) {
  yaml::Node n = yaml::Node::sequence();
  for (const auto& s : items) n.push_back(yaml::Node::scalar(s));
  return n;
}

void sort_by_path(std::vector<Violation>& v) {
  std::stable_sort(v.begin(), v.end(), [](const Violation& a, const Violation& b) {
    return a.path < b.path;
  });
}

}  // namespace dlspec::detail
