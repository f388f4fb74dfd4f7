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

#pragma once

// Schema-directed reading helpers shared by every document format.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dlspec/parser.hpp"
#include "dlspec/yaml.hpp"

namespace dlspec::detail {

std::string key_path(std::string_view parent, std::string_view key);
std::string index_path(std::string_view parent, std::size_t index);

class Diagnostics {
 public:
  void add(std::string path, std::string_view code, std::string message,
           Severity severity = Severity::error);
  bool has_errors() const noexcept;
  std::vector<Violation>& items() noexcept { return items_; }
  std::vector<Violation> take();

 private:
  std::vector<Violation> items_;
};

/// View over a mapping node that tracks which keys were consumed.
class MapReader {
 public:
  /// `node` may be null (absent); a non-mapping node is a type mismatch.
  MapReader(const yaml::Node* node, std::string path, Diagnostics& diag);

  bool ok() const noexcept { return node_ != nullptr; }
  const std::string& path() const noexcept { return path_; }
  std::string child(std::string_view key) const { return key_path(path_, key); }

  const yaml::Node* required(std::string_view key);
  const yaml::Node* optional(std::string_view key);

  /// Reports every key that was neither required() nor optional().
  void finish();

  /// Iterates free-form entries (for maps such as env or metrics).
  const std::vector<yaml::Node::Entry>& entries() const;

 private:
  const yaml::Node* node_;
  std::string path_;
  Diagnostics& diag_;
  std::set<std::string, std::less<>> seen_;
};

std::optional<std::string> read_string(const yaml::Node* n,
                                       const std::string& path,
                                       Diagnostics& diag);
std::optional<bool> read_bool(const yaml::Node* n, const std::string& path,
                              Diagnostics& diag);
std::optional<double> read_number(const yaml::Node* n, const std::string& path,
                                  Diagnostics& diag);
std::optional<std::int64_t> read_int(const yaml::Node* n,
                                     const std::string& path,
                                     Diagnostics& diag);
std::optional<Scalar> read_scalar(const yaml::Node* n, const std::string& path,
                                  Diagnostics& diag);
/// Returns the sequence node, or nullptr after reporting a mismatch.
const yaml::Node* read_sequence(const yaml::Node* n, const std::string& path,
                                Diagnostics& diag);
std::vector<std::string> read_string_list(const yaml::Node* n,
                                          const std::string& path,
                                          Diagnostics& diag);
std::map<std::string, std::string> read_string_map(const yaml::Node* n,
                                                   const std::string& path,
                                                   Diagnostics& diag);
std::map<std::string, Scalar> read_scalar_map(const yaml::Node* n,
                                              const std::string& path,
                                              Diagnostics& diag);

/// Parses text into a tree, turning syntax errors into a violation.
std::optional<yaml::Node> parse_tree(std::string_view text, Diagnostics& diag);

/// Reads `kind` and checks it against `expected`; returns the root reader.
MapReader open_document(const yaml::Node& root, std::string_view expected,
                        Diagnostics& diag);

/// Throws ManifestError when diag holds errors.
void throw_if_errors(Diagnostics& diag);

yaml::Node string_map_node(const std::map<std::string, std::string>& m);
yaml::Node scalar_map_node(const std::map<std::string, Scalar>& m);
yaml::Node string_list_node(const std::vector<std::string>& items);

void sort_by_path(std::vector<Violation>& v);

}  // namespace dlspec::detail
