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

#include "dlspec/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <regex>

#include "dlspec/error.hpp"

namespace dlspec {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<E, std::string_view>, N>& table,
                        std::string_view text) {
  for (const auto& [value, name] : table) {
    if (name == text) return value;
  }
  return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table,
                         E value) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return "?";
}

constexpr std::array<std::pair<Kind, std::string_view>, 4> kKinds{{
    {Kind::hardware, "hardware"},
    {Kind::software, "software"},
    {Kind::dataset, "dataset"},
    {Kind::model, "model"},
}};

constexpr std::array<std::pair<Unpack, std::string_view>, 4> kUnpack{{
    {Unpack::none, "none"},
    {Unpack::tar, "tar"},
    {Unpack::tar_gz, "tar.gz"},
    {Unpack::zip, "zip"},
}};

constexpr std::array<std::pair<ConstraintOp, std::string_view>, 6> kOps{{
    {ConstraintOp::eq, "eq"},
    {ConstraintOp::ne, "ne"},
    {ConstraintOp::ge, "ge"},
    {ConstraintOp::le, "le"},
    {ConstraintOp::in, "in"},
    {ConstraintOp::matches, "matches"},
}};

constexpr std::array<std::pair<Split, std::string_view>, 3> kSplits{{
    {Split::training, "training"},
    {Split::validation, "validation"},
    {Split::test, "test"},
}};

constexpr std::array<std::pair<ElementType, std::string_view>, 7> kElementTypes{{
    {ElementType::float32, "float32"},
    {ElementType::float64, "float64"},
    {ElementType::int32, "int32"},
    {ElementType::int64, "int64"},
    {ElementType::uint8, "uint8"},
    {ElementType::string, "string"},
    {ElementType::bytes, "bytes"},
}};

constexpr std::array<std::pair<TaskKind, std::string_view>, 2> kTaskKinds{{
    {TaskKind::inference, "inference"},
    {TaskKind::training, "training"},
}};

constexpr std::array<std::pair<Stage, std::string_view>, 3> kStages{{
    {Stage::pre_processing, "pre_processing"},
    {Stage::run, "run"},
    {Stage::post_processing, "post_processing"},
}};

bool is_lower_hex(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
}

}  // namespace

std::string_view kind_name(Kind kind) noexcept { return name_of(kKinds, kind); }
std::optional<Kind> parse_kind(std::string_view text) noexcept {
  return lookup(kKinds, text);
}

std::string_view unpack_name(Unpack u) noexcept { return name_of(kUnpack, u); }
std::optional<Unpack> parse_unpack(std::string_view text) noexcept {
  return lookup(kUnpack, text);
}

std::string_view constraint_op_name(ConstraintOp op) noexcept {
  return name_of(kOps, op);
}
std::optional<ConstraintOp> parse_constraint_op(std::string_view text) noexcept {
  return lookup(kOps, text);
}

std::string_view split_name(Split s) noexcept { return name_of(kSplits, s); }
std::optional<Split> parse_split(std::string_view text) noexcept {
  return lookup(kSplits, text);
}

std::string_view element_type_name(ElementType t) noexcept {
  return name_of(kElementTypes, t);
}
std::optional<ElementType> parse_element_type(std::string_view text) noexcept {
  return lookup(kElementTypes, text);
}

std::string_view task_kind_name(TaskKind k) noexcept {
  return name_of(kTaskKinds, k);
}
std::optional<TaskKind> parse_task_kind(std::string_view text) noexcept {
  return lookup(kTaskKinds, text);
}

std::string_view stage_name(Stage s) noexcept { return name_of(kStages, s); }
std::optional<Stage> parse_stage(std::string_view text) noexcept {
  return lookup(kStages, text);
}

std::string ManifestId::to_string() const {
  return std::string(kind_name(kind)) + ":" + name + "@" + version.to_string();
}

bool is_valid_manifest_name(std::string_view name) noexcept {
  if (name.empty()) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '.' || c == '-';
  });
}

ManifestId parse_manifest_id(std::string_view text) {
  const auto colon = text.find(':');
  const auto at = text.find('@');
  if (colon == std::string_view::npos || at == std::string_view::npos ||
      at < colon) {
    throw Error(Errc::malformed,
                "malformed manifest id '" + std::string(text) +
                    "', expected kind:name@version");
  }
  auto kind = parse_kind(text.substr(0, colon));
  if (!kind) {
    throw Error(Errc::malformed,
                "unknown kind in manifest id '" + std::string(text) + "'");
  }
  std::string name(text.substr(colon + 1, at - colon - 1));
  if (!is_valid_manifest_name(name)) {
    throw Error(Errc::malformed,
                "invalid name in manifest id '" + std::string(text) + "'");
  }
  return ManifestId{*kind, std::move(name), parse_version(text.substr(at + 1))};
}

std::string scalar_text(const Scalar& value) {
  struct Visitor {
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const {
      if (std::isnan(d)) return "nan";
      if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
      char buf[64];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, d);
      return std::string(buf, ptr);
    }
    std::string operator()(const std::string& s) const { return s; }
  };
  return std::visit(Visitor{}, value);
}

bool scalar_is_numeric(const Scalar& value) noexcept {
  return std::holds_alternative<std::int64_t>(value) ||
         std::holds_alternative<double>(value);
}

double scalar_number(const Scalar& value) {
  if (auto* i = std::get_if<std::int64_t>(&value)) {
    return static_cast<double>(*i);
  }
  if (auto* d = std::get_if<double>(&value)) return *d;
  throw Error(Errc::malformed, "scalar '" + scalar_text(value) +
                                   "' is not a number");
}

std::string Checksum::to_string() const { return algorithm + ":" + digest; }

Checksum parse_checksum(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw Error(Errc::malformed, "checksum '" + std::string(text) +
                                     "' lacks an algorithm tag");
  }
  Checksum c{std::string(text.substr(0, colon)),
             std::string(text.substr(colon + 1))};
  if (c.algorithm != "sha256") {
    throw Error(Errc::malformed,
                "unsupported checksum algorithm '" + c.algorithm + "'");
  }
  if (c.digest.size() != 64 ||
      !std::all_of(c.digest.begin(), c.digest.end(), is_lower_hex)) {
    throw Error(Errc::malformed,
                "sha256 digest must be 64 lowercase hex characters");
  }
  return c;
}

std::string url_scheme(std::string_view url) {
  const auto pos = url.find("://");
  if (pos == std::string_view::npos || pos == 0) return {};
  std::string scheme(url.substr(0, pos));
  for (char& c : scheme) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return scheme;
}

StageCode StageCode::identity() {
  return StageCode{std::string(kStageLanguage),
                   "def fun(ctx, data):\n    return data\n"};
}

const StageCode& ModelManifest::stage(Stage s) const {
  switch (s) {
    case Stage::pre_processing:
      return pre_processing;
    case Stage::post_processing:
      return post_processing;
    case Stage::run:
      break;
  }
  return run;
}

const ManifestId& manifest_id(const Manifest& m) {
  return std::visit([](const auto& v) -> const ManifestId& { return v.id; }, m);
}

Kind manifest_kind(const Manifest& m) { return manifest_id(m).kind; }

std::string canonical_id(const Manifest& m) { return manifest_id(m).to_string(); }

const ManifestId& BundleIds::at(Kind k) const {
  switch (k) {
    case Kind::hardware: return hardware;
    case Kind::software: return software;
    case Kind::dataset: return dataset;
    case Kind::model: break;
  }
  return model;
}

ManifestId& BundleIds::at(Kind k) {
  return const_cast<ManifestId&>(std::as_const(*this).at(k));
}

BundleIds TaskBundle::ids() const {
  return BundleIds{hardware.id, software.id, dataset.id, model.id};
}

std::string utc_timestamp_now() {
  const auto now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool is_valid_timestamp(std::string_view text) noexcept {
  static const std::regex re(
      R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d+)?Z)");
  return std::regex_match(text.begin(), text.end(), re);
}

}  // namespace dlspec
