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

#include "dlspec/registry.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "document.hpp"
#include "dlspec/parser.hpp"
#include "file_lock.hpp"

namespace dlspec {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kSuffix = ".dlspec.yml";
constexpr std::string_view kBundleKind = "bundle";

std::optional<std::string> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string ManifestRef::to_string() const {
  return std::string(kind_name(kind)) + ":" + name + "@" + range.to_string();
}

ManifestRef parse_manifest_ref(std::string_view text, std::optional<Kind> kind) {
  auto malformed = [&](const std::string& why) -> ManifestRef {
    throw Error(Errc::malformed, "bad manifest reference '" + std::string(text) + "': " + why);
  };
  ManifestRef ref;
  std::string_view rest = text;
  if (const auto colon = rest.find(':'); colon != std::string_view::npos) {
    const auto k = parse_kind(rest.substr(0, colon));
    if (!k) return malformed("unknown kind");
    if (kind && *k != *kind) {
      return malformed("expected a " + std::string(kind_name(*kind)) + " reference");
    }
    ref.kind = *k;
    rest.remove_prefix(colon + 1);
  } else if (kind) {
    ref.kind = *kind;
  } else {
    return malformed("missing kind");
  }
  std::string_view range = "*";
  if (const auto at = rest.find('@'); at != std::string_view::npos) {
    range = rest.substr(at + 1);
    rest = rest.substr(0, at);
  }
  if (!is_valid_manifest_name(rest)) return malformed("invalid name");
  ref.name = std::string(rest);
  try {
    ref.range = parse_range(range);
  } catch (const Error& e) {
    return malformed(e.what());
  }
  return ref;
}

std::vector<ManifestRef> parse_bundle_file(std::string_view text) {
  detail::Diagnostics diag;
  std::vector<ManifestRef> refs;
  if (auto tree = detail::parse_tree(text, diag)) {
    detail::MapReader root = detail::open_document(*tree, kBundleKind, diag);
    detail::MapReader sec(root.required(kBundleKind), std::string(kBundleKind), diag);
    for (Kind k : kAllKinds) {
      const std::string path = sec.child(kind_name(k));
      if (auto s = detail::read_string(sec.required(kind_name(k)), path, diag)) {
        try {
          refs.push_back(parse_manifest_ref(*s, k));
        } catch (const Error& e) {
          diag.add(path, "invalid-value", e.what());
        }
      }
    }
    sec.finish();
    root.finish();
  }
  detail::throw_if_errors(diag);
  return refs;
}

std::string serialize_bundle_file(std::span<const ManifestRef> refs) {
  yaml::Node sec = yaml::Node::mapping();
  for (Kind k : kAllKinds) {
    for (const auto& r : refs) {
      if (r.kind == k) sec.set(std::string(kind_name(k)), yaml::Node::scalar(r.name + "@" + r.range.to_string()));
    }
  }
  yaml::Node root = yaml::Node::mapping();
  root.set("kind", yaml::Node::scalar(std::string(kBundleKind)));
  root.set(std::string(kBundleKind), sec);
  return yaml::emit(root);
}

Registry::Registry(fs::path root) : root_(std::move(root)) {}

fs::path Registry::path_for(const ManifestId& id) const {
  return root_ / std::string(kind_name(id.kind)) / id.name /
         (id.version.to_string() + std::string(kSuffix));
}

ManifestId Registry::put(const Manifest& manifest) {
  auto violations = validate(manifest);
  if (has_errors(violations)) throw ManifestError(std::move(violations));
  const ManifestId id = manifest_id(manifest);
  const std::string text = serialize(manifest);
  const fs::path path = path_for(id);
  std::error_code ec;
  fs::create_directories(root_, ec);
  detail::FileLock lock(root_ / ".lock");
  if (auto existing = slurp(path)) {
    if (*existing == text) return id;
    throw Error(Errc::conflict, id.to_string() + " is already published with different content");
  }
  detail::write_atomically(path, text);
  return id;
}

Manifest Registry::get(const ManifestId& id) const {
  const fs::path path = path_for(id);
  auto text = slurp(path);
  if (!text) throw Error(Errc::not_found, id.to_string() + " is not in the registry");
  Manifest m = parse_manifest(*text);
  if (manifest_id(m) != id) {
    throw Error(Errc::malformed, path.string() + " holds " + canonical_id(m));
  }
  return m;
}

std::vector<Version> Registry::versions(Kind kind, const std::string& name) const {
  std::vector<Version> out;
  if (!is_valid_manifest_name(name)) return out;
  const fs::path dir = root_ / std::string(kind_name(kind)) / name;
  std::error_code ec;
  for (auto it = fs::directory_iterator(dir, ec); !ec && it != fs::directory_iterator();
       it.increment(ec)) {
    const std::string file = it->path().filename().string();
    if (!file.ends_with(kSuffix)) continue;
    try {
      out.push_back(parse_version(file.substr(0, file.size() - kSuffix.size())));
    } catch (const Error&) {
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ManifestId> Registry::list() const {
  std::vector<ManifestId> out;
  for (Kind k : kAllKinds) {
    std::error_code ec;
    const fs::path dir = root_ / std::string(kind_name(k));
    for (auto it = fs::directory_iterator(dir, ec); !ec && it != fs::directory_iterator();
         it.increment(ec)) {
      if (!it->is_directory()) continue;
      const std::string name = it->path().filename().string();
      for (const auto& v : versions(k, name)) out.push_back(ManifestId{k, name, v});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Manifest Registry::resolve(Kind kind, const std::string& name, const VersionRange& range) const {
  const auto all = versions(kind, name);
  for (auto it = all.rbegin(); it != all.rend(); ++it) {
    if (range.contains(*it)) return get(ManifestId{kind, name, *it});
  }
  throw Error(Errc::not_found, "no " + std::string(kind_name(kind)) + " manifest '" + name +
                                   "' satisfies " + range.to_string());
}

Manifest Registry::resolve(const ManifestRef& ref) const {
  return resolve(ref.kind, ref.name, ref.range);
}

TaskBundle Registry::resolve_bundle(std::span<const ManifestRef> refs) const {
  std::map<Kind, const ManifestRef*> by_kind;
  std::string problems;
  for (const auto& r : refs) {
    if (!by_kind.emplace(r.kind, &r).second) {
      problems += " duplicate " + std::string(kind_name(r.kind)) + ";";
    }
  }
  for (Kind k : kAllKinds) {
    if (!by_kind.count(k)) problems += " missing " + std::string(kind_name(k)) + ";";
  }
  if (!problems.empty()) {
    problems.pop_back();
    throw Error(Errc::bundle_kinds, "bundle needs exactly one ref per kind:" + problems);
  }
  TaskBundle b;
  b.hardware = std::get<HardwareManifest>(resolve(*by_kind[Kind::hardware]));
  b.software = std::get<SoftwareManifest>(resolve(*by_kind[Kind::software]));
  b.dataset = std::get<DatasetManifest>(resolve(*by_kind[Kind::dataset]));
  b.model = std::get<ModelManifest>(resolve(*by_kind[Kind::model]));
  return b;
}

}  // namespace dlspec
