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

#include "dlspec/version.hpp"

#include <algorithm>
#include <charconv>

#include "dlspec/error.hpp"

namespace dlspec {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_ident_char(char c) {
  return is_digit(c) || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         c == '-';
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_digit);
}

[[noreturn]] void malformed(std::string_view text, std::string_view why) {
  throw Error(Errc::malformed, "malformed version '" + std::string(text) +
                                   "': " + std::string(why));
}

std::uint64_t parse_numeric(std::string_view whole, std::string_view part) {
  if (part.empty()) malformed(whole, "missing component");
  if (!all_digits(part)) malformed(whole, "non-numeric component");
  if (part.size() > 1 && part.front() == '0') malformed(whole, "leading zero");
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
  if (ec != std::errc() || ptr != part.data() + part.size()) {
    malformed(whole, "component out of range");
  }
  return value;
}

std::strong_ordering compare_identifier(const std::string& a,
                                        const std::string& b) {
  const bool an = all_digits(a);
  const bool bn = all_digits(b);
  if (an && bn) {
    if (a.size() != b.size()) return a.size() <=> b.size();
    return a.compare(b) <=> 0;
  }
  if (an) return std::strong_ordering::less;
  if (bn) return std::strong_ordering::greater;
  return a.compare(b) <=> 0;
}

}  // namespace

std::string Version::to_string() const {
  std::string out = std::to_string(major) + "." + std::to_string(minor) + "." +
                    std::to_string(patch);
  for (std::size_t i = 0; i < prerelease.size(); ++i) {
    out += (i == 0 ? '-' : '.');
    out += prerelease[i];
  }
  return out;
}

std::strong_ordering operator<=>(const Version& a, const Version& b) {
  if (auto c = a.major <=> b.major; c != 0) return c;
  if (auto c = a.minor <=> b.minor; c != 0) return c;
  if (auto c = a.patch <=> b.patch; c != 0) return c;
  // A release outranks any of its prereleases.
  if (a.prerelease.empty() && b.prerelease.empty()) {
    return std::strong_ordering::equal;
  }
  if (a.prerelease.empty()) return std::strong_ordering::greater;
  if (b.prerelease.empty()) return std::strong_ordering::less;
  const std::size_t n = std::min(a.prerelease.size(), b.prerelease.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (auto c = compare_identifier(a.prerelease[i], b.prerelease[i]); c != 0) {
      return c;
    }
  }
  return a.prerelease.size() <=> b.prerelease.size();
}

Version parse_version(std::string_view text) {
  std::string_view rest = text;
  std::string_view pre;
  if (auto dash = rest.find('-'); dash != std::string_view::npos) {
    pre = rest.substr(dash + 1);
    rest = rest.substr(0, dash);
    if (pre.empty()) malformed(text, "empty prerelease");
  }
  if (rest.find('+') != std::string_view::npos ||
      pre.find('+') != std::string_view::npos) {
    malformed(text, "build metadata is not allowed");
  }

  Version v;
  std::uint64_t* slots[] = {&v.major, &v.minor, &v.patch};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t dot = rest.find('.', pos);
    const bool last = (i == 2);
    if (!last && dot == std::string_view::npos) {
      malformed(text, "expected major.minor.patch");
    }
    const std::string_view part =
        last ? rest.substr(pos) : rest.substr(pos, dot - pos);
    if (last && part.find('.') != std::string_view::npos) {
      malformed(text, "too many components");
    }
    *slots[i] = parse_numeric(text, part);
    pos = dot + 1;
  }

  std::size_t start = 0;
  while (!pre.empty() && start <= pre.size()) {
    const std::size_t dot = pre.find('.', start);
    const std::string_view ident = dot == std::string_view::npos
                                       ? pre.substr(start)
                                       : pre.substr(start, dot - start);
    if (ident.empty()) malformed(text, "empty prerelease identifier");
    if (!std::all_of(ident.begin(), ident.end(), is_ident_char)) {
      malformed(text, "invalid prerelease identifier");
    }
    if (all_digits(ident) && ident.size() > 1 && ident.front() == '0') {
      malformed(text, "leading zero in numeric prerelease identifier");
    }
    v.prerelease.emplace_back(ident);
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return v;
}

std::string VersionRange::to_string() const {
  switch (op) {
    case Op::any:
      return "*";
    case Op::caret:
      return "^" + base.to_string();
    case Op::exact:
      break;
  }
  return "=" + base.to_string();
}

bool VersionRange::contains(const Version& v) const {
  switch (op) {
    case Op::any:
      return true;
    case Op::exact:
      return v == base;
    case Op::caret:
      return v.major == base.major && v >= base;
  }
  return false;
}

VersionRange parse_range(std::string_view text) {
  if (text == "*") return VersionRange{};
  VersionRange range;
  std::string_view body = text;
  if (!body.empty() && body.front() == '^') {
    range.op = VersionRange::Op::caret;
    body.remove_prefix(1);
  } else {
    range.op = VersionRange::Op::exact;
    if (!body.empty() && body.front() == '=') body.remove_prefix(1);
  }
  try {
    range.base = parse_version(body);
  } catch (const Error& e) {
    throw Error(Errc::malformed,
                "malformed version range '" + std::string(text) + "'");
  }
  return range;
}

}  // namespace dlspec
