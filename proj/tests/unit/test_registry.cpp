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

#include <catch_amalgamated.hpp>

#include <random>
#include <thread>

#include "dlspec/digest.hpp"
#include "dlspec/parser.hpp"
#include "dlspec/registry.hpp"
#include "test_support.hpp"

using namespace dlspec;
using dlspec::test::TempDir;
namespace fs = std::filesystem;

namespace {

HardwareManifest hw(const std::string& name, const std::string& version) {
  HardwareManifest m;
  m.id = {Kind::hardware, name, parse_version(version)};
  return m;
}

// Linear scan for the highest satisfying version, using only the textual
// caret rule and the oracle ordering below.
std::optional<Version> oracle_max(const std::vector<Version>& set, const std::string& range) {
  std::optional<Version> best;
  for (const auto& v : set) {
    bool ok = false;
    if (range == "*") {
      ok = true;
    } else if (range[0] == '^') {
      const Version base = parse_version(range.substr(1));
      ok = v.major == base.major && !(v < base);
    } else {
      ok = v.to_string() == range.substr(range[0] == '=' ? 1 : 0);
    }
    if (ok && (!best || *best < v)) best = v;
  }
  return best;
}

void load_corpus(Registry& reg) {
  for (const auto& f : test::corpus_manifests()) reg.put(parse_manifest(test::read_file(f)));
}

}  // namespace

TEST_CASE("put is idempotent and published versions are immutable", "[registry]") {
  TempDir dir;
  Registry reg(dir.path());
  const Manifest m = parse_manifest(test::read_file(test::corpus_dir() / "model/resnet50.dlspec.yml"));
  const ManifestId id = reg.put(m);
  CHECK(id.to_string() == "model:resnet50@1.0.0");
  const fs::path file = dir.path() / "model/resnet50/1.0.0.dlspec.yml";
  CHECK(reg.path_for(id) == file);
  REQUIRE(fs::exists(file));
  const std::string digest = sha256_file(file);

  CHECK(reg.put(m) == id);
  CHECK(sha256_file(file) == digest);
  CHECK(reg.get(id) == m);

  ModelManifest changed = std::get<ModelManifest>(m);
  changed.hyperparameters["batch_size"] = std::int64_t{64};
  try {
    reg.put(changed);
    FAIL("expected conflict");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::conflict);
  }
  CHECK(sha256_file(file) == digest);
  CHECK(reg.list() == std::vector<ManifestId>{id});
}

TEST_CASE("invalid manifests are not stored", "[registry]") {
  TempDir dir;
  Registry reg(dir.path());
  SoftwareManifest s;
  s.id = {Kind::software, "s", parse_version("1.0.0")};
  CHECK_THROWS_AS(reg.put(s), ManifestError);
  CHECK(reg.list().empty());
}

TEST_CASE("resolution picks the highest satisfying version", "[registry]") {
  TempDir dir;
  Registry reg(dir.path());
  for (const char* v : {"1.0.0", "1.1.0", "2.0.0"}) reg.put(hw("h", v));
  auto version_of = [&](const char* range) {
    return manifest_id(reg.resolve(Kind::hardware, "h", parse_range(range))).version.to_string();
  };
  CHECK(version_of("^1.0.0") == "1.1.0");
  CHECK(version_of("*") == "2.0.0");
  CHECK(version_of("=1.0.0") == "1.0.0");
  // Prereleases are ordinary versions for the caret rule.
  reg.put(hw("h", "1.2.0-rc.1"));
  CHECK(version_of("^1.0.0") == "1.2.0-rc.1");
  CHECK(version_of("^1.2.0-rc.1") == "1.2.0-rc.1");
  try {
    reg.resolve(Kind::hardware, "h", parse_range("=3.0.0"));
    FAIL("expected not-found");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::not_found);
  }
  CHECK_THROWS_AS(reg.resolve(Kind::hardware, "other", parse_range("*")), Error);
  CHECK_THROWS_AS(reg.resolve(Kind::model, "h", parse_range("*")), Error);
}

TEST_CASE("resolution agrees with a brute-force oracle", "[registry][property]") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 150; ++trial) {
    TempDir dir;
    Registry reg(dir.path());
    std::vector<Version> set;
    const int n = static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      const Version v = test::random_version(rng);
      if (std::find(set.begin(), set.end(), v) == set.end()) {
        set.push_back(v);
        reg.put(hw("h", v.to_string()));
      }
    }
    for (int q = 0; q < 8; ++q) {
      const Version base = test::random_version(rng);
      const std::string range = q % 4 == 0 ? "*" : (q % 4 == 1 ? "=" : "^") + base.to_string();
      const auto expected = oracle_max(set, range);
      INFO("range " << range);
      if (expected) {
        CHECK(manifest_id(reg.resolve(Kind::hardware, "h", parse_range(range))).version == *expected);
      } else {
        CHECK_THROWS_AS(reg.resolve(Kind::hardware, "h", parse_range(range)), Error);
      }
    }
  }
}

TEST_CASE("adding versions only moves answers upward", "[registry][property]") {
  std::mt19937_64 rng(59);
  TempDir dir;
  Registry reg(dir.path());
  std::vector<std::string> ranges = {"*", "^0.0.0", "^1.0.0", "^2.0.0", "=1.1.1"};
  std::map<std::string, std::optional<Version>> answers;
  for (int step = 0; step < 40; ++step) {
    const Version v = test::random_version(rng);
    try {
      reg.put(hw("h", v.to_string()));
    } catch (const Error&) {
    }
    for (const auto& r : ranges) {
      std::optional<Version> now;
      try {
        now = manifest_id(reg.resolve(Kind::hardware, "h", parse_range(r))).version;
      } catch (const Error&) {
      }
      const auto& before = answers[r];
      if (before) {
        REQUIRE(now.has_value());
        CHECK(!(*now < *before));
      }
      answers[r] = now;
    }
  }
}

TEST_CASE("bundles resolve one manifest per kind", "[registry]") {
  TempDir dir;
  Registry reg(dir.path());
  load_corpus(reg);
  const auto refs = parse_bundle_file(test::read_file(test::corpus_dir() / "bundles/synthetic-sum.dlspec.yml"));
  REQUIRE(refs.size() == 4);
  const TaskBundle b = reg.resolve_bundle(refs);
  CHECK(b.ids().hardware.to_string() == "hardware:any-linux@1.0.0");
  CHECK(b.ids().dataset.to_string() == "dataset:synthetic-ints@1.0.0");
  CHECK(b.ids().model.to_string() == "model:synthetic-sum@1.0.0");

  std::vector<ManifestRef> missing(refs.begin(), refs.end());
  missing.erase(missing.begin() + 2);
  try {
    reg.resolve_bundle(missing);
    FAIL("expected duplicate-or-missing-kind");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::bundle_kinds);
    CHECK(errc_name(e.code()) == "duplicate-or-missing-kind");
  }
  std::vector<ManifestRef> dup(refs.begin(), refs.end());
  dup.push_back(refs[0]);
  CHECK_THROWS_AS(reg.resolve_bundle(dup), Error);

  TempDir only2;
  Registry reg2(only2.path());
  load_corpus(reg2);
  DatasetManifest d2 = std::get<DatasetManifest>(reg2.get(b.ids().dataset));
  d2.id = {Kind::dataset, "ints2", parse_version("2.0.0")};
  reg2.put(d2);
  std::vector<ManifestRef> want(refs.begin(), refs.end());
  want[2] = parse_manifest_ref("dataset:ints2@^1.0.0");
  try {
    reg2.resolve_bundle(want);
    FAIL("expected not-found");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::not_found);
  }
}

TEST_CASE("manifest references", "[registry]") {
  const ManifestRef r = parse_manifest_ref("model:resnet50@^1.0.0");
  CHECK(r.kind == Kind::model);
  CHECK(r.name == "resnet50");
  CHECK(r.range == parse_range("^1.0.0"));
  CHECK(r.to_string() == "model:resnet50@^1.0.0");
  CHECK(parse_manifest_ref("dataset:x").range.op == VersionRange::Op::any);
  CHECK(parse_manifest_ref("x@=1.0.0", Kind::software).kind == Kind::software);
  CHECK(parse_manifest_ref("x@1.0.0", Kind::software).range.op == VersionRange::Op::exact);
  for (const char* bad : {"x", "gpu:x", "model:X", "model:x@^1", "model:@1.0.0"}) {
    INFO(bad);
    CHECK_THROWS_AS(parse_manifest_ref(bad), Error);
  }
  CHECK_THROWS_AS(parse_manifest_ref("model:x", Kind::dataset), Error);

  const auto refs = parse_bundle_file(test::read_file(test::corpus_dir() / "bundles/synthetic-sum.dlspec.yml"));
  CHECK(parse_bundle_file(serialize_bundle_file(refs)) == refs);
  CHECK_THROWS_AS(parse_bundle_file("kind: bundle\nbundle:\n  hardware: h\n"), ManifestError);
}

TEST_CASE("concurrent writers serialize on the registry lock", "[registry][concurrency]") {
  TempDir dir;
  std::vector<std::thread> threads;
  std::atomic<int> conflicts{0}, ok{0};
  for (int t = 0; t < 6; ++t) {
    threads.emplace_back([&, t] {
      Registry reg(dir.path());
      HardwareManifest m = hw("shared", "1.0.0");
      if (t % 2) m.setup.push_back(SetupCommand{{"true"}, true, "variant"});
      try {
        reg.put(m);
        ok++;
      } catch (const Error& e) {
        if (e.code() == Errc::conflict) conflicts++;
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(ok + conflicts == 6);
  CHECK(ok == 3);
  Registry reg(dir.path());
  CHECK(reg.list().size() == 1);
  CHECK_NOTHROW(reg.get(reg.list().front()));
}
