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

// Strict YAML subset used by every on-disk document: one document per file,
// block/flow mappings and sequences, plain/quoted/literal scalars. Anchors,
// aliases, explicit tags, complex keys, duplicate keys and multi-document
// streams are rejected. Plain scalars resolve with the YAML 1.2 core schema.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dlspec/error.hpp"
#include "dlspec/manifest.hpp"

namespace dlspec::yaml {

/// 1-based source position.
struct Mark {
  int line = 0;
  int column = 0;
};

class ParseError : public Error {
 public:
  ParseError(Mark mark, const std::string& message, bool unsupported = false)
      : Error(Errc::malformed, message), mark_(mark), unsupported_(unsupported) {}

  Mark mark() const noexcept { return mark_; }
  /// True when the input is valid YAML outside the accepted subset.
  bool unsupported() const noexcept { return unsupported_; }

 private:
  Mark mark_;
  bool unsupported_;
};

class Node {
 public:
  enum class Type { null, scalar, sequence, mapping };

  struct Entry;

  Node() = default;

  static Node null();
  /// `plain` scalars are subject to type resolution; quoted and block
  /// scalars are always strings.
  static Node scalar(std::string value, bool plain = false);
  static Node from(const Scalar& value);
  static Node sequence(std::vector<Node> items = {});
  static Node mapping();

  Type type() const noexcept { return type_; }
  bool is_null() const noexcept { return type_ == Type::null; }
  bool is_scalar() const noexcept { return type_ == Type::scalar; }
  bool is_sequence() const noexcept { return type_ == Type::sequence; }
  bool is_mapping() const noexcept { return type_ == Type::mapping; }

  const std::string& value() const noexcept { return value_; }
  bool plain() const noexcept { return plain_; }
  Mark mark() const noexcept { return mark_; }
  void set_mark(Mark m) noexcept { mark_ = m; }

  /// Typed value of a scalar; nullopt for null, sequences and mappings.
  std::optional<Scalar> resolved() const;

  std::vector<Node>& items() noexcept { return items_; }
  const std::vector<Node>& items() const noexcept { return items_; }
  std::vector<Entry>& entries() noexcept { return entries_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  const Node* find(std::string_view key) const;
  Node* find(std::string_view key);
  /// Appends, or replaces the value of an existing key in place.
  Node& set(std::string key, Node value);
  bool erase(std::string_view key);
  void push_back(Node item) { items_.push_back(std::move(item)); }

 private:
  Type type_ = Type::null;
  std::string value_;
  bool plain_ = false;
  Mark mark_;
  std::vector<Node> items_;
  std::vector<Entry> entries_;
};

struct Node::Entry {
  std::string key;
  Mark key_mark;
  Node value;
};

/// Parses exactly one document. Throws ParseError.
Node parse(std::string_view text);

/// Canonical block-style text; mappings keep their entry order.
std::string emit(const Node& root);

/// YAML 1.2 core-schema resolution of a plain scalar; nullopt means null.
std::optional<Scalar> resolve_plain(std::string_view text);

}  // namespace dlspec::yaml
