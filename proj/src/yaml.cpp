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

#include "dlspec/yaml.hpp"

#include <yaml-cpp/eventhandler.h>
#include <yaml-cpp/exceptions.h>
#include <yaml-cpp/parser.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <regex>
#include <sstream>

namespace dlspec::yaml {

namespace {

Mark to_mark(const YAML::Mark& m) { return Mark{m.line + 1, m.column + 1}; }

// Builds a Node tree from parser events, rejecting constructs outside the
// accepted subset.
class TreeBuilder final : public YAML::EventHandler {
 public:
  void OnDocumentStart(const YAML::Mark&) override {}
  void OnDocumentEnd() override {}

  void OnNull(const YAML::Mark& mark, YAML::anchor_t anchor) override {
    check_anchor(mark, anchor);
    Node n = Node::null();
    n.set_mark(to_mark(mark));
    complete(std::move(n));
  }

  void OnAlias(const YAML::Mark& mark, YAML::anchor_t) override {
    throw ParseError(to_mark(mark), "aliases are not supported", true);
  }

  void OnAnchor(const YAML::Mark& mark, const std::string&) override {
    throw ParseError(to_mark(mark), "anchors are not supported", true);
  }

  void OnScalar(const YAML::Mark& mark, const std::string& tag,
                YAML::anchor_t anchor, const std::string& value) override {
    check_anchor(mark, anchor);
    if (tag != "?" && tag != "!") {
      throw ParseError(to_mark(mark), "explicit tags are not supported", true);
    }
    Node n = Node::scalar(value, tag == "?");
    n.set_mark(to_mark(mark));
    complete(std::move(n));
  }

  void OnSequenceStart(const YAML::Mark& mark, const std::string& tag,
                       YAML::anchor_t anchor, YAML::EmitterStyle::value) override {
    check_collection(mark, tag, anchor);
    Node n = Node::sequence();
    n.set_mark(to_mark(mark));
    stack_.emplace_back();
    stack_.back().node = std::move(n);
  }

  void OnSequenceEnd() override { pop(); }

  void OnMapStart(const YAML::Mark& mark, const std::string& tag,
                  YAML::anchor_t anchor, YAML::EmitterStyle::value) override {
    check_collection(mark, tag, anchor);
    Node n = Node::mapping();
    n.set_mark(to_mark(mark));
    stack_.emplace_back();
    stack_.back().node = std::move(n);
  }

  void OnMapEnd() override { pop(); }

  std::optional<Node>& root() { return root_; }

 private:
  struct Frame {
    Node node;
    bool have_key = false;
    std::string key;
    Mark key_mark;
  };

  static void check_anchor(const YAML::Mark& mark, YAML::anchor_t anchor) {
    if (anchor != YAML::NullAnchor) {
      throw ParseError(to_mark(mark), "anchors are not supported", true);
    }
  }

  static void check_collection(const YAML::Mark& mark, const std::string& tag,
                               YAML::anchor_t anchor) {
    check_anchor(mark, anchor);
    if (!tag.empty() && tag != "?" && tag != "!") {
      throw ParseError(to_mark(mark), "explicit tags are not supported", true);
    }
  }

  void pop() {
    Node done = std::move(stack_.back().node);
    stack_.pop_back();
    complete(std::move(done));
  }

  void complete(Node n) {
    if (stack_.empty()) {
      root_ = std::move(n);
      return;
    }
    Frame& top = stack_.back();
    if (top.node.is_sequence()) {
      top.node.push_back(std::move(n));
      return;
    }
    if (!top.have_key) {
      if (!n.is_scalar()) {
        throw ParseError(n.mark(), "mapping keys must be non-empty scalars",
                         true);
      }
      if (top.node.find(n.value()) != nullptr) {
        throw ParseError(n.mark(), "duplicate key '" + n.value() + "'");
      }
      top.key = n.value();
      top.key_mark = n.mark();
      top.have_key = true;
      return;
    }
    top.node.entries().push_back(
        Node::Entry{std::move(top.key), top.key_mark, std::move(n)});
    top.have_key = false;
  }

  std::vector<Frame> stack_;
  std::optional<Node> root_;
};

std::string spaces(int n) { return std::string(static_cast<std::size_t>(n), ' '); }

bool is_printable_ascii(char c) { return c >= 0x20 && c < 0x7f; }

bool plain_safe(std::string_view s, bool flow) {
  if (s.empty()) return false;
  if (s.front() == ' ' || s.back() == ' ') return false;
  if (std::string_view("-?:,[]{}#&*!|>'\"%@`.").find(s.front()) !=
      std::string_view::npos) {
    return false;
  }
  for (char c : s) {
    if (!is_printable_ascii(c)) return false;
    // yaml-cpp misreads '?' inside plain scalars.
    if (c == '?') return false;
    if (flow && std::string_view(",[]{}:").find(c) != std::string_view::npos) {
      return false;
    }
  }
  if (s.find(": ") != std::string_view::npos ||
      s.find(" #") != std::string_view::npos || s.back() == ':') {
    return false;
  }
  auto resolved = resolve_plain(s);
  return resolved && std::holds_alternative<std::string>(*resolved);
}

std::string double_quoted(std::string_view s) {
  static const char* hex = "0123456789abcdef";
  std::string out = "\"";
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (u < 0x20 || u == 0x7f) {
          out += "\\x";
          out += hex[u >> 4];
          out += hex[u & 0xf];
        } else {
          out += c;
        }
    }
  }
  out += '"';
  return out;
}

// Splits a literal-style candidate into lines and chomping indicator.
// Returns nullopt when the string cannot be written as a literal block.
struct LiteralForm {
  std::vector<std::string_view> lines;
  std::string header;
};

std::optional<LiteralForm> literal_form(std::string_view s) {
  if (s.find('\n') == std::string_view::npos) return std::nullopt;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if ((u < 0x20 && c != '\n' && c != '\t') || u == 0x7f) return std::nullopt;
  }
  std::size_t trailing = 0;
  while (trailing < s.size() && s[s.size() - 1 - trailing] == '\n') ++trailing;
  std::string_view body = s.substr(0, s.size() - trailing);
  if (body.find_first_not_of(" \t\n") == std::string_view::npos) {
    return std::nullopt;
  }
  LiteralForm form;
  std::size_t start = 0;
  while (true) {
    const auto nl = body.find('\n', start);
    form.lines.push_back(body.substr(start, nl == std::string_view::npos
                                                ? std::string_view::npos
                                                : nl - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  for (std::size_t i = 1; i < trailing; ++i) form.lines.emplace_back();
  form.header = "|";
  for (auto line : form.lines) {
    if (line.empty()) continue;
    if (line.front() == ' ' || line.front() == '\t') form.header += "2";
    break;
  }
  if (trailing == 0) {
    form.header += "-";
  } else if (trailing > 1) {
    form.header += "+";
  }
  return form;
}

std::string inline_scalar(const Node& n, bool flow) {
  if (n.is_null()) return "null";
  if (n.plain()) {
    auto resolved = n.resolved();
    if (!resolved || !std::holds_alternative<std::string>(*resolved)) {
      return n.value();
    }
  }
  if (plain_safe(n.value(), flow)) return n.value();
  return double_quoted(n.value());
}

bool flow_friendly(const Node& seq) {
  return std::all_of(seq.items().begin(), seq.items().end(), [](const Node& i) {
    return i.is_null() || i.is_scalar();
  });
}

void emit_mapping(std::string& out, const Node& map, int indent);
void emit_sequence(std::string& out, const Node& seq, int indent);

std::string key_text(const std::string& key) {
  return plain_safe(key, false) ? key : double_quoted(key);
}

void emit_literal(std::string& out, const LiteralForm& form, int indent) {
  out += ' ';
  out += form.header;
  out += '\n';
  for (auto line : form.lines) {
    if (!line.empty()) {
      out += spaces(indent);
      out += line;
    }
    out += '\n';
  }
}

std::string flow_sequence(const Node& seq) {
  std::string out = "[";
  for (std::size_t i = 0; i < seq.items().size(); ++i) {
    if (i) out += ", ";
    out += inline_scalar(seq.items()[i], true);
  }
  out += "]";
  return out;
}

// Emits whatever follows "key:" or "-" on the current line.
void emit_value(std::string& out, const Node& v, int child_indent) {
  switch (v.type()) {
    case Node::Type::null:
      out += " null\n";
      return;
    case Node::Type::scalar:
      if (!v.plain()) {
        if (auto form = literal_form(v.value())) {
          emit_literal(out, *form, child_indent);
          return;
        }
      }
      out += ' ';
      out += inline_scalar(v, false);
      out += '\n';
      return;
    case Node::Type::sequence:
      if (v.items().empty() || flow_friendly(v)) {
        out += ' ';
        out += flow_sequence(v);
        out += '\n';
        return;
      }
      out += '\n';
      emit_sequence(out, v, child_indent);
      return;
    case Node::Type::mapping:
      if (v.entries().empty()) {
        out += " {}\n";
        return;
      }
      out += '\n';
      emit_mapping(out, v, child_indent);
      return;
  }
}

void emit_mapping(std::string& out, const Node& map, int indent) {
  for (const auto& e : map.entries()) {
    out += spaces(indent);
    out += key_text(e.key);
    out += ':';
    emit_value(out, e.value, indent + 2);
  }
}

void emit_sequence(std::string& out, const Node& seq, int indent) {
  for (const auto& item : seq.items()) {
    if (item.is_mapping() && !item.entries().empty()) {
      std::string body;
      emit_mapping(body, item, indent + 2);
      out += spaces(indent);
      out += "- ";
      out += body.substr(static_cast<std::size_t>(indent + 2));
      continue;
    }
    out += spaces(indent);
    out += '-';
    emit_value(out, item, indent + 2);
  }
}

}  // namespace

Node Node::null() { return Node{}; }

Node Node::scalar(std::string value, bool plain) {
  Node n;
  n.type_ = Type::scalar;
  n.value_ = std::move(value);
  n.plain_ = plain;
  return n;
}

Node Node::from(const Scalar& value) {
  struct Visitor {
    Node operator()(bool b) const { return Node::scalar(b ? "true" : "false", true); }
    Node operator()(std::int64_t i) const {
      return Node::scalar(std::to_string(i), true);
    }
    Node operator()(double d) const {
      if (std::isnan(d)) return Node::scalar(".nan", true);
      if (std::isinf(d)) return Node::scalar(d > 0 ? ".inf" : "-.inf", true);
      char buf[64];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, d);
      std::string text(buf, ptr);
      if (text.find_first_of(".e") == std::string::npos) text += ".0";
      return Node::scalar(std::move(text), true);
    }
    Node operator()(const std::string& s) const { return Node::scalar(s, false); }
  };
  return std::visit(Visitor{}, value);
}

Node Node::sequence(std::vector<Node> items) {
  Node n;
  n.type_ = Type::sequence;
  n.items_ = std::move(items);
  return n;
}

Node Node::mapping() {
  Node n;
  n.type_ = Type::mapping;
  return n;
}

std::optional<Scalar> Node::resolved() const {
  if (type_ != Type::scalar) return std::nullopt;
  if (!plain_) return Scalar{value_};
  return resolve_plain(value_);
}

const Node* Node::find(std::string_view key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return &e.value;
  }
  return nullptr;
}

Node* Node::find(std::string_view key) {
  return const_cast<Node*>(std::as_const(*this).find(key));
}

Node& Node::set(std::string key, Node value) {
  if (Node* existing = find(key)) {
    *existing = std::move(value);
    return *existing;
  }
  entries_.push_back(Entry{std::move(key), {}, std::move(value)});
  return entries_.back().value;
}

bool Node::erase(std::string_view key) {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const Entry& e) { return e.key == key; });
  if (it == entries_.end()) return false;
  entries_.erase(it);
  return true;
}

std::optional<Scalar> resolve_plain(std::string_view text) {
  static const std::regex dec_int(R"([-+]?[0-9]+)");
  static const std::regex oct_int(R"(0o[0-7]+)");
  static const std::regex hex_int(R"(0x[0-9a-fA-F]+)");
  static const std::regex real(
      R"([-+]?(\.[0-9]+|[0-9]+(\.[0-9]*)?)([eE][-+]?[0-9]+)?)");
  static const std::regex inf(R"([-+]?\.(inf|Inf|INF))");
  static const std::regex nan(R"(\.(nan|NaN|NAN))");

  if (text.empty() || text == "~" || text == "null" || text == "Null" ||
      text == "NULL") {
    return std::nullopt;
  }
  if (text == "true" || text == "True" || text == "TRUE") return Scalar{true};
  if (text == "false" || text == "False" || text == "FALSE") {
    return Scalar{false};
  }
  const std::string s(text);
  auto parse_int = [&](std::string_view digits, int base) -> std::optional<Scalar> {
    std::int64_t value = 0;
    const bool neg = !digits.empty() && digits.front() == '-';
    if (!digits.empty() && (digits.front() == '-' || digits.front() == '+')) {
      digits.remove_prefix(1);
    }
    std::uint64_t mag = 0;
    auto [ptr, ec] =
        std::from_chars(digits.data(), digits.data() + digits.size(), mag, base);
    const auto limit = static_cast<std::uint64_t>(
                           std::numeric_limits<std::int64_t>::max()) +
                       (neg ? 1u : 0u);
    if (ec != std::errc() || mag > limit) return std::nullopt;
    value = neg ? static_cast<std::int64_t>(0 - mag) : static_cast<std::int64_t>(mag);
    return Scalar{value};
  };
  if (std::regex_match(s, dec_int)) {
    if (auto v = parse_int(s, 10)) return v;
    return Scalar{std::strtod(s.c_str(), nullptr)};
  }
  if (std::regex_match(s, oct_int)) {
    if (auto v = parse_int(std::string_view(s).substr(2), 8)) return v;
  }
  if (std::regex_match(s, hex_int)) {
    if (auto v = parse_int(std::string_view(s).substr(2), 16)) return v;
  }
  if (std::regex_match(s, real)) {
    // from_chars rejects a leading '+' and bare ".5" is fine for it.
    std::string_view digits = s;
    if (digits.front() == '+') digits.remove_prefix(1);
    double d = 0;
    auto [ptr, ec] = std::from_chars(digits.data(),
                                     digits.data() + digits.size(), d);
    if (ec == std::errc::result_out_of_range) {
      d = std::strtod(s.c_str(), nullptr);
    }
    return Scalar{d};
  }
  if (std::regex_match(s, inf)) {
    return Scalar{s.front() == '-' ? -std::numeric_limits<double>::infinity()
                                   : std::numeric_limits<double>::infinity()};
  }
  if (std::regex_match(s, nan)) {
    return Scalar{std::numeric_limits<double>::quiet_NaN()};
  }
  return Scalar{s};
}

Node parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  TreeBuilder builder;
  try {
    YAML::Parser parser(in);
    if (!parser.HandleNextDocument(builder)) {
      throw ParseError(Mark{1, 1}, "empty document");
    }
    TreeBuilder extra;
    if (parser.HandleNextDocument(extra)) {
      throw ParseError(Mark{1, 1}, "multiple documents are not supported",
                       true);
    }
  } catch (const YAML::ParserException& e) {
    throw ParseError(to_mark(e.mark), e.msg);
  }
  if (!builder.root()) throw ParseError(Mark{1, 1}, "empty document");
  return std::move(*builder.root());
}

std::string emit(const Node& root) {
  std::string out;
  switch (root.type()) {
    case Node::Type::mapping:
      if (root.entries().empty()) return "{}\n";
      emit_mapping(out, root, 0);
      return out;
    case Node::Type::sequence:
      if (root.items().empty() || flow_friendly(root)) {
        return flow_sequence(root) + "\n";
      }
      emit_sequence(out, root, 0);
      return out;
    case Node::Type::null:
    case Node::Type::scalar:
      break;
  }
  emit_value(out, root, 2);
  return out.substr(1);
}

}  // namespace dlspec::yaml
