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
#include <set>
#include <sstream>

#include "dlspec/cli.hpp"
#include "dlspec/orchestrator.hpp"
#include "dlspec/parser.hpp"
#include "dlspec/registry.hpp"
#include "test_support.hpp"

using namespace dlspec;
namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;
using json = nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

// A registry holding the synthetic bundle, a cache and a declared host.
class Workspace {
 public:
  Workspace() {
    bundle = test::synthetic_bundle(dir / "data");
    Registry reg(dir / "registry");
    reg.put(bundle.hardware);
    reg.put(bundle.software);
    reg.put(bundle.dataset);
    reg.put(bundle.model);
    bundle_file = dir / "bundle.dlspec.yml";
    fs::copy_file(test::corpus_dir() / "bundles/synthetic-sum.dlspec.yml", bundle_file);
  }

  Result cli(std::vector<std::string> args, std::vector<std::string> worker_flags = {"--output", "6"}) {
    std::string worker = test::mock_worker_path();
    for (const auto& f : worker_flags) worker += " " + f;
    std::vector<std::string> full = {"--registry", (dir / "registry").string(),
                                     "--cache", (dir / "cache").string(),
                                     "--backend", "process",
                                     "--host-file", (test::corpus_dir() / "hosts/ci-host.dlspec.yml").string(),
                                     "--worker-cmd", worker};
    full.insert(full.end(), args.begin(), args.end());
    return raw(full);
  }

  Result raw(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    CliHooks hooks;
    hooks.counters = &counters;
    Result r;
    r.code = run_cli(args, out, err, hooks);
    r.out = out.str();
    r.err = err.str();
    return r;
  }

  fs::path write(const std::string& name, const std::string& text) {
    test::write_file(dir / name, text);
    return dir / name;
  }

  fs::path write_manifest(const std::string& name, const Manifest& m) {
    return write(name, serialize(m));
  }

  std::string runs() const { return (dir / "runs").string(); }

  test::TempDir dir;
  TaskBundle bundle;
  fs::path bundle_file;
  Counters counters;
};

std::string line_value(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) {
    if (l.rfind(key, 0) == 0) return l.substr(key.size());
  }
  return {};
}

const std::set<int> kDocumented = {0, 1, 2, 3, 4, 5, 64};

}  // namespace

TEST_CASE("validate accepts the corpus silently", "[cli]") {
  Workspace w;
  const Result r = w.raw({"validate", test::corpus_dir().string()});
  INFO(r.out << r.err);
  CHECK(r.code == 0);
  CHECK(r.out.empty());
}

TEST_CASE("validate reports violations one per line", "[cli]") {
  Workspace w;
  std::string text = test::read_file(test::corpus_dir() / "model/resnet50.dlspec.yml");
  const auto pos = text.find("version:");
  REQUIRE(pos != std::string::npos);
  text.erase(pos, text.find('\n', pos) - pos + 1);
  const fs::path p = w.write("broken.dlspec.yml", text);
  const Result r = w.raw({"validate", p.string()});
  CHECK(r.code == 1);
  REQUIRE_FALSE(r.out.empty());
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1);
  CHECK(r.out.rfind(p.string() + ":version:", 0) == 0);

  const Result j = w.raw({"--format", "json", "validate", p.string()});
  CHECK(j.code == 1);
  const json arr = json::parse(j.out);
  REQUIRE(arr.is_array());
  REQUIRE(arr.size() == 1);
  CHECK(arr[0]["path"] == "version");
  CHECK(arr[0]["file"] == p.string());
}

TEST_CASE("usage errors exit 64", "[cli]") {
  Workspace w;
  CHECK(w.raw({"validate", (w.dir / "missing.dlspec.yml").string()}).code == 64);
  CHECK(w.raw({"validate"}).code == 64);
  CHECK(w.raw({}).code == 64);
  CHECK(w.raw({"frobnicate"}).code == 64);
  CHECK(w.raw({"--format", "xml", "probe"}).code == 64);
  CHECK(w.raw({"--backend", "vm", "probe"}).code == 64);
  CHECK(w.cli({"run"}).code == 64);
  CHECK(w.cli({"compare", "a"}).code == 64);
  CHECK(w.cli({"compare", w.bundle_file.string(), "x", "--tol", "accuracy"}).code == 64);
  const Result help = w.raw({"--help"});
  CHECK(help.code == 0);
  CHECK_THAT(help.out, ContainsSubstring("validate"));
  CHECK(w.raw({"--version"}).code == 0);
}

TEST_CASE("run executes the synthetic bundle", "[cli][run]") {
  Workspace w;
  const Result r = w.cli({"run", w.bundle_file.string(), "--run-dir", w.runs(), "--emit-reference-log",
                          "--author", "contact=maintainers@example.org"});
  INFO(r.out << r.err);
  REQUIRE(r.code == 0);
  CHECK(line_value(r.out, "final_output_digest: ") == "sha256:" + test::oracle_sha256_of("6"));
  const fs::path record = line_value(r.out, "record: ");
  REQUIRE(fs::exists(record));
  const RunRecord rec = parse_run_record(test::read_file(record));
  CHECK(rec.succeeded());
  const fs::path log = line_value(r.out, "reference_log: ");
  REQUIRE(fs::exists(log));
  CHECK(parse_reference_log(test::read_file(log)).author_info.at("contact") ==
        Scalar{std::string("maintainers@example.org")});

  CHECK(w.cli({"compare", record.string(), log.string()}).code == 0);
  CHECK(w.cli({"compare", record.parent_path().string(), log.string()}).code == 0);
  const fs::path corpus_log = test::corpus_dir() / "reference-logs/synthetic-sum.dlspec.yml";
  const Result cmp = w.cli({"compare", record.string(), corpus_log.string()});
  CHECK(cmp.code == 0);
  CHECK_THAT(cmp.out, ContainsSubstring("expected_outputs"));
}

TEST_CASE("one flag swaps one aspect of the bundle", "[cli][run]") {
  Workspace w;
  ModelManifest m = w.bundle.model;
  m.id.version = parse_version("1.1.0");
  Registry(w.dir / "registry").put(m);
  const Result r = w.cli({"--format", "json", "resolve", "--bundle", w.bundle_file.string(),
                          "--model", "synthetic-sum@=1.0.0"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j[3]["id"] == "model:synthetic-sum@1.0.0");
  const Result caret = w.cli({"resolve", "model:synthetic-sum@^1.0.0"});
  CHECK(caret.out == "model:synthetic-sum@^1.0.0 -> model:synthetic-sum@1.1.0\n");
  CHECK(w.cli({"resolve", "model:synthetic-sum@^2.0.0"}).code == 1);
  CHECK(w.cli({"resolve", "model:no-such-model"}).code == 1);
  CHECK(w.cli({"resolve", "not a ref"}).code == 1);
}

TEST_CASE("run maps failures to exit codes", "[cli][run]") {
  SECTION("unsatisfied constraint -> 2, nothing fetched or launched") {
    Workspace w;
    HardwareManifest hw = w.bundle.hardware;
    hw.constraints.push_back({"memory_gb", ConstraintOp::ge, Scalar{1e6}});
    const fs::path p = w.write_manifest("hw.dlspec.yml", hw);
    const Result r = w.cli({"--format", "json", "run", w.bundle_file.string(), "--hardware",
                            p.string(), "--run-dir", w.runs()});
    CHECK(r.code == 2);
    const json j = json::parse(r.out);
    CHECK(j["failure"]["code"] == "gate-failed");
    CHECK(j["counters"]["fetch_requests"] == 0);
    CHECK(j["counters"]["launches"] == 0);
    CHECK(w.counters.transfers == 0);
  }
  SECTION("unknown key -> 2 unless allowed") {
    Workspace w;
    HardwareManifest hw = w.bundle.hardware;
    hw.constraints.push_back({"cpu.turbo_boost", ConstraintOp::eq, Scalar{std::string("off")}});
    const fs::path p = w.write_manifest("hw.dlspec.yml", hw);
    CHECK(w.cli({"run", w.bundle_file.string(), "--hardware", p.string(), "--run-dir", w.runs()}).code == 2);
    CHECK(w.counters.launches == 0);
    CHECK(w.cli({"--allow-unknown", "run", w.bundle_file.string(), "--hardware", p.string(),
                 "--run-dir", w.runs()})
              .code == 0);
  }
  SECTION("checksum mismatch -> 3") {
    Workspace w;
    DatasetManifest d = w.bundle.dataset;
    d.resources[0].checksum = parse_checksum("sha256:" + test::oracle_sha256_of("9\n"));
    const fs::path p = w.write_manifest("ds.dlspec.yml", d);
    const Result r = w.cli({"run", w.bundle_file.string(), "--dataset", p.string(), "--run-dir", w.runs()});
    CHECK(r.code == 3);
    CHECK(w.counters.stage_runs == 0);
    CHECK(w.cli({"fetch", p.string()}).code == 3);
  }
  SECTION("stage failure -> 4") {
    Workspace w;
    CHECK(w.cli({"run", w.bundle_file.string(), "--run-dir", w.runs()}, {"--fail-stage", "run"}).code == 4);
  }
  SECTION("worker missing -> 4") {
    Workspace w;
    Result r = w.raw({"--registry", (w.dir / "registry").string(), "--cache", (w.dir / "cache").string(),
                      "--backend", "process", "--worker-cmd", "dlspec-no-such-worker", "run",
                      w.bundle_file.string(), "--run-dir", w.runs()});
    CHECK(r.code == 4);
  }
  SECTION("unresolvable bundle -> 1") {
    Workspace w;
    CHECK(w.cli({"run", w.bundle_file.string(), "--model", "ghost@^1.0.0"}).code == 1);
  }
}

TEST_CASE("dry run prints the tagged plan", "[cli][run]") {
  Workspace w;
  const Result r = w.cli({"run", w.bundle_file.string(), "--dry-run", "--run-dir", w.runs()});
  INFO(r.out << r.err);
  CHECK(r.code == 0);
  for (int t : {1, 2, 3, 4, 5, 6, 7, 9, 11, 12}) CHECK_THAT(r.out, ContainsSubstring(circled(t)));
  CHECK_THAT(r.out, ContainsSubstring("gate: satisfied"));
  CHECK_FALSE(fs::exists(w.runs()));
  CHECK(w.counters.launches == 0);
  CHECK(w.counters.fetch_requests == 0);
}

TEST_CASE("fetch fills the cache once", "[cli][fetch]") {
  Workspace w;
  const Result first = w.cli({"--format", "json", "fetch", "dataset:synthetic-ints@^1.0.0"});
  REQUIRE(first.code == 0);
  const json j = json::parse(first.out);
  REQUIRE(j["resources"].size() == 3);
  CHECK(j["counters"]["transfers"] == 3);
  const Result again = w.cli({"--format", "json", "fetch", "dataset:synthetic-ints@^1.0.0"});
  CHECK(json::parse(again.out)["counters"]["transfers"] == 3);
  CHECK(w.cli({"fetch", "software:python-synthetic"}).code == 64);
}

TEST_CASE("compare applies tolerances and identity checks", "[cli][compare]") {
  Workspace w;
  RunRecord r;
  r.bundle = w.bundle.ids();
  r.started_at = "2026-10-14T09:30:00Z";
  r.final_output_digest = parse_checksum("sha256:" + test::oracle_sha256_of("6"));
  r.metrics = {{"accuracy", 0.7580}};
  ReferenceLog log = emit_reference_log(r, {}, "2026-10-14T09:30:00Z");
  log.metrics["accuracy"] = 0.7585;
  const fs::path rp = w.write("record.dlspec.yml", serialize(r));
  const fs::path lp = w.write("log.dlspec.yml", serialize(log));
  CHECK(w.raw({"compare", rp.string(), lp.string()}).code == 5);
  CHECK(w.raw({"compare", rp.string(), lp.string(), "--tol", "accuracy=1e-3"}).code == 0);
  const Result j = w.raw({"--format", "json", "compare", rp.string(), lp.string()});
  CHECK(json::parse(j.out)["passed"] == false);

  ReferenceLog other = log;
  other.bundle.dataset = parse_manifest_id("dataset:synthetic-ints@2.0.0");
  const fs::path op = w.write("other.dlspec.yml", serialize(other));
  CHECK(w.raw({"compare", rp.string(), op.string(), "--tol", "accuracy=1"}).code == 5);

  const fs::path junk = w.write("junk.dlspec.yml", "kind: model\n");
  CHECK(w.raw({"compare", rp.string(), junk.string()}).code == 1);
  CHECK(w.raw({"compare", junk.string(), lp.string()}).code == 1);
}

TEST_CASE("probe describes the host and checks hardware", "[cli][probe]") {
  Workspace w;
  const fs::path host = test::corpus_dir() / "hosts/ci-host.dlspec.yml";
  const Result r = w.raw({"--host-file", host.string(), "--format", "json", "probe", "--hardware",
                          (test::corpus_dir() / "hardware/any-linux.dlspec.yml").string()});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["values"]["num_cpus"] == 8);
  CHECK(j["gate"]["passed"] == true);
  CHECK(w.raw({"--host-file", host.string(), "probe", "--hardware",
               (test::corpus_dir() / "hardware/power9-node.dlspec.yml").string()})
            .code == 2);
  const Result probed = w.raw({"probe"});
  CHECK(probed.code == 0);
  CHECK_THAT(probed.out, ContainsSubstring("num_cpus"));
}

TEST_CASE("publish stores manifests immutably", "[cli]") {
  Workspace w;
  const std::string reg = (w.dir / "fresh").string();
  const Result r = w.raw({"--registry", reg, "publish", (test::corpus_dir() / "model").string()});
  INFO(r.err);
  CHECK(r.code == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 4);
  CHECK(w.raw({"--registry", reg, "publish", (test::corpus_dir() / "model").string()}).code == 0);
  ModelManifest m = w.bundle.model;
  m.hyperparameters["batch_size"] = std::int64_t{7};
  const fs::path p = w.write_manifest("changed.dlspec.yml", m);
  CHECK(w.raw({"--registry", reg, "publish", p.string()}).code == 1);
}

TEST_CASE("json output parses for every command", "[cli][property]") {
  Workspace w;
  const std::string corpus = test::corpus_dir().string();
  const fs::path log = test::corpus_dir() / "reference-logs/synthetic-sum.dlspec.yml";
  const std::vector<std::vector<std::string>> cases = {
      {"validate", corpus},
      {"validate", (w.dir / "missing").string()},
      {"resolve", "model:synthetic-sum"},
      {"resolve", "model:ghost"},
      {"fetch", "dataset:synthetic-ints"},
      {"run", w.bundle_file.string(), "--run-dir", w.runs()},
      {"run", w.bundle_file.string(), "--dry-run"},
      {"run", w.bundle_file.string(), "--model", "ghost"},
      {"compare", log.string(), log.string()},
      {"probe"},
      {"publish", corpus + "/model"},
  };
  for (const auto& c : cases) {
    std::vector<std::string> args = {"--format", "json"};
    args.insert(args.end(), c.begin(), c.end());
    const Result r = w.cli(args);
    INFO(c.front() << " -> " << r.code << "\n" << r.out << r.err);
    CHECK(kDocumented.count(r.code) == 1);
    CHECK(json::accept(r.out));
  }
}

TEST_CASE("malformed inputs never exit 0", "[cli][property][fuzz]") {
  Workspace w;
  std::mt19937_64 rng(4242);
  const std::vector<std::string> seeds = {
      test::read_file(test::corpus_dir() / "model/synthetic-sum.dlspec.yml"),
      test::read_file(test::corpus_dir() / "bundles/synthetic-sum.dlspec.yml"),
      test::read_file(test::corpus_dir() / "reference-logs/synthetic-sum.dlspec.yml"),
      "kind: run-record\nrun_record: {}\n",
      ":\n- [\n",
      std::string("\0\xff\xfe", 3),
  };
  const fs::path log = test::corpus_dir() / "reference-logs/synthetic-sum.dlspec.yml";
  int tried = 0;
  for (int i = 0; i < 120; ++i) {
    std::string text = seeds[rng() % seeds.size()];
    // Truncate, then splice random bytes; keep only inputs that no longer validate.
    if (!text.empty()) text.resize(rng() % text.size());
    for (int k = 0, n = static_cast<int>(rng() % 4); k < n; ++k) {
      const char junk[] = {':', '-', '[', '{', '\n', ' ', '\t', '"', '&', '*', '!', '%', '@'};
      text.insert(text.empty() ? 0 : rng() % text.size(), 1, junk[rng() % sizeof(junk)]);
    }
    const fs::path p = w.write("fuzz.dlspec.yml", text);
    const Result v = w.raw({"validate", p.string()});
    CHECK(kDocumented.count(v.code) == 1);
    if (v.code == 0) continue;  // the edit happened to leave a valid document
    ++tried;
    const Result c = w.raw({"compare", p.string(), log.string()});
    INFO(text);
    CHECK(c.code != 0);
    CHECK(kDocumented.count(c.code) == 1);
    const Result r = w.cli({"run", p.string(), "--run-dir", w.runs()});
    CHECK(r.code != 0);
    CHECK(kDocumented.count(r.code) == 1);
    const Result j = w.raw({"--format", "json", "validate", p.string()});
    CHECK(json::accept(j.out));
  }
  CHECK(tried > 60);
}

TEST_CASE("the executable wraps the library", "[cli]") {
  const auto [code, out] = test::run_command({test::cli_path(), "validate", test::corpus_dir().string()});
  CHECK(code == 0);
  CHECK(out.empty());
  CHECK(test::run_command({test::cli_path(), "--format", "json", "frobnicate"}).first == 64);
}
