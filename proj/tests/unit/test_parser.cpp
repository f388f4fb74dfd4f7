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

#include <algorithm>
#include <random>
#include <set>

#include "dlspec/parser.hpp"
#include "dlspec/yaml.hpp"
#include "test_support.hpp"

using namespace dlspec;
namespace fs = std::filesystem;

namespace {

bool has_violation(const std::vector<Violation>& vs, const std::string& path,
                   const std::string& code = {}) {
  return std::any_of(vs.begin(), vs.end(), [&](const Violation& v) {
    return v.path == path && (code.empty() || v.code == code);
  });
}

std::string describe(const std::vector<Violation>& vs) {
  std::string out;
  for (const auto& v : vs) out += v.path + " " + v.code + ": " + v.message + "\n";
  return out;
}

const char* kMinimalHardware =
    "kind: hardware\nname: h\nversion: 1.0.0\nhardware:\n  constraints: []\n";

std::string minimal_model(const std::string& extra = {}) {
  return "kind: model\nname: m\nversion: 1.0.0\nmodel:\n"
         "  task_kind: inference\n"
         "  inputs:\n    - name: x\n      element_type: float32\n"
         "  outputs:\n    - name: y\n      element_type: float32\n"
         "  run:\n    source: |\n      def fun(ctx, data):\n          return data\n" +
         extra;
}

}  // namespace

TEST_CASE("canonical ids", "[parser]") {
  SECTION("formatting") {
    ModelManifest m;
    m.id = {Kind::model, "resnet50", parse_version("1.0.0")};
    CHECK(canonical_id(m) == "model:resnet50@1.0.0");
    HardwareManifest h;
    h.id = {Kind::hardware, "x86-server", parse_version("2.1.0")};
    CHECK(canonical_id(h) == "hardware:x86-server@2.1.0");
    DatasetManifest d;
    d.id = {Kind::dataset, "imagenet-test", parse_version("1.0.0")};
    CHECK(canonical_id(d) == "dataset:imagenet-test@1.0.0");
  }
  SECTION("round trip and injectivity") {
    std::mt19937_64 rng(17);
    std::set<std::string> seen_text;
    std::set<ManifestId> seen_ids;
    for (int i = 0; i < 1000; ++i) {
      const ManifestId id = manifest_id(test::random_manifest(rng));
      CHECK(parse_manifest_id(id.to_string()) == id);
      seen_text.insert(id.to_string());
      seen_ids.insert(id);
    }
    CHECK(seen_text.size() == seen_ids.size());
  }
  CHECK_THROWS_AS(parse_manifest_id("model:Bad@1.0.0"), Error);
  CHECK_THROWS_AS(parse_manifest_id("gpu:x@1.0.0"), Error);
  CHECK_THROWS_AS(parse_manifest_id("model:x"), Error);
}

TEST_CASE("minimal manifests parse", "[parser]") {
  const Manifest m = parse_manifest(kMinimalHardware);
  REQUIRE(std::holds_alternative<HardwareManifest>(m));
  CHECK(std::get<HardwareManifest>(m).id.name == "h");
  CHECK(validate(m).empty());

  const Manifest model = parse_manifest(minimal_model());
  const auto& mm = std::get<ModelManifest>(model);
  CHECK(mm.pre_processing == StageCode::identity());
  CHECK(mm.post_processing == StageCode::identity());
  CHECK(mm.run.source == "def fun(ctx, data):\n    return data\n");
  CHECK(mm.run.language == "python");
}

TEST_CASE("model with three stages and an artifact", "[parser]") {
  const std::string text = test::read_file(test::corpus_dir() / "model/resnet50.dlspec.yml");
  const auto m = std::get<ModelManifest>(parse_manifest(text));
  CHECK(m.artifacts.size() == 1);
  for (Stage s : kAllStages) {
    CHECK(m.stage(s).source.find("def fun(ctx, data):") != std::string::npos);
  }
}

TEST_CASE("unknown keys are rejected at their path", "[parser]") {
  const std::string text = std::string(kMinimalHardware) + "extra_stuff: 1\n";
  const auto vs = lint(text);
  CHECK(vs.size() == 1);
  CHECK(has_violation(vs, "extra_stuff", "unknown-key"));
  try {
    parse_manifest(text);
    FAIL("expected ManifestError");
  } catch (const ManifestError& e) {
    CHECK(e.violations() == vs);
  }
  CHECK(has_violation(lint(minimal_model("    lang: python\n")), "model.run.lang",
                      "unknown-key"));
}

TEST_CASE("syntax errors carry positions", "[parser]") {
  const auto vs = lint("kind: hardware\nname: [h\n");
  REQUIRE(vs.size() == 1);
  CHECK(vs[0].code == "syntax-error");
  CHECK(vs[0].message.find("line ") != std::string::npos);
  CHECK(lint("kind: model\nx: &a 1\n").at(0).code == "unsupported-yaml");
}

TEST_CASE("violation examples", "[parser]") {
  struct Case {
    std::string text;
    std::string path;
    std::string code;
  };
  const std::string sw = "kind: software\nname: s\nversion: 1.0.0\nsoftware:\n";
  const std::string ds = "kind: dataset\nname: d\nversion: 1.0.0\ndataset:\n  split: test\n";
  const std::string sha(64, 'a');
  const std::vector<Case> cases = {
      {sw + "  container_image: \"\"\n", "software.container_image", "required-empty"},
      {sw + "  container_image: img\n  env:\n    lower: x\n", "software.env.lower",
       "invalid-env-key"},
      {ds + "  resources: []\n", "dataset.resources", "empty-resources"},
      {ds + "  resources:\n    - url: gopher://x/y\n      checksum: sha256:" + sha + "\n",
       "dataset.resources[0].url", "unsupported-scheme"},
      {ds + "  resources:\n    - url: nowhere\n      checksum: sha256:" + sha + "\n",
       "dataset.resources[0].url", "invalid-url"},
      {ds + "  resources:\n    - url: file://relative/x\n      checksum: sha256:" + sha + "\n",
       "dataset.resources[0].url", "invalid-url"},
      {ds + "  resources:\n    - url: http://h/x\n      checksum: sha256:ABC\n",
       "dataset.resources[0].checksum", "invalid-checksum"},
      {ds + "  resources:\n    - url: http://h/x\n      checksum: md5:" + sha + "\n",
       "dataset.resources[0].checksum", "invalid-checksum"},
      {"kind: dataset\nname: d\nversion: 1.0.0\ndataset:\n  split: dev\n  resources: []\n",
       "dataset.split", "invalid-value"},
      {"kind: widget\nname: w\nversion: 1.0.0\n", "kind", "unknown-kind"},
      {"kind: hardware\nname: Bad Name\nversion: 1.0.0\nhardware:\n  constraints: []\n",
       "name", "invalid-name"},
      {"kind: hardware\nname: h\nversion: 1.0\nhardware:\n  constraints: []\n",
       "version", "invalid-version"},
      {"kind: hardware\nname: h\nversion: 1.0.0\nhardware:\n  constraints: 3\n",
       "hardware.constraints", "type-mismatch"},
      {"kind: hardware\nname: h\nversion: 1.0.0\nhardware:\n  constraints:\n"
       "    - {key: a, op: eq, value: 1}\n    - {key: a, op: eq, value: 2}\n",
       "hardware.constraints[1].key", "duplicate-name"},
      {"kind: hardware\nname: h\nversion: 1.0.0\nhardware:\n  constraints:\n"
       "    - {key: a, op: ge, value: lots}\n",
       "hardware.constraints[0].value", "invalid-constraint"},
      {"kind: hardware\nname: h\nversion: 1.0.0\nhardware:\n  constraints:\n"
       "    - {key: a, op: in, value: 1}\n",
       "hardware.constraints[0].value", "invalid-constraint"},
      {"kind: hardware\nname: h\nversion: 1.0.0\nhardware:\n  constraints:\n"
       "    - {key: a, op: matches, value: \"(\"}\n",
       "hardware.constraints[0].value", "invalid-pattern"},
      {"kind: hardware\nname: h\nversion: 1.0.0\nhardware:\n  constraints:\n"
       "    - {key: a, op: about, value: 1}\n",
       "hardware.constraints[0].op", "invalid-value"},
      {"kind: hardware\nname: h\nversion: 1.0.0\nhardware:\n  constraints: []\n"
       "  setup:\n    - argv: []\n",
       "hardware.setup[0].argv", "required-empty"},
  };
  for (const auto& c : cases) {
    INFO(c.text);
    const auto vs = lint(c.text);
    INFO(describe(vs));
    CHECK(has_violation(vs, c.path, c.code));
  }
}

TEST_CASE("model violations", "[parser]") {
  const std::string base = "kind: model\nname: m\nversion: 1.0.0\nmodel:\n";
  const std::string run =
      "  run:\n    source: |\n      def fun(ctx, data):\n          return data\n";
  auto vs = lint(base + "  task_kind: inference\n  inputs: []\n  outputs: []\n" + run);
  CHECK(has_violation(vs, "model.inputs", "empty-io"));
  CHECK(has_violation(vs, "model.outputs", "empty-io"));

  vs = lint(base + "  task_kind: training\n  inputs: []\n  outputs: []\n" + run);
  CHECK(vs.empty());

  vs = lint(base +
            "  task_kind: inference\n"
            "  inputs:\n    - {name: x, element_type: float32, shape: [1, 0, \"*\"]}\n"
            "    - {name: x, element_type: int8}\n"
            "  outputs:\n    - {name: y, element_type: float32, shape: [\"?\"]}\n" +
            run);
  INFO(describe(vs));
  CHECK(has_violation(vs, "model.inputs[0].shape[1]", "invalid-shape"));
  CHECK(has_violation(vs, "model.inputs[1].name", "duplicate-name"));
  CHECK(has_violation(vs, "model.inputs[1].element_type", "invalid-value"));
  CHECK(has_violation(vs, "model.outputs[0].shape[0]", "invalid-shape"));

  vs = lint(minimal_model("  post_processing:\n    source: |\n      def other(x):\n"
                          "          return x\n"));
  CHECK(has_violation(vs, "model.post_processing.source", "invalid-stage"));
  vs = lint(minimal_model("  pre_processing:\n    language: lua\n    source: |\n"
                          "      def fun(ctx, data):\n          return data\n"));
  CHECK(has_violation(vs, "model.pre_processing.language", "invalid-value"));
}

TEST_CASE("violations are sorted by path and use documented codes", "[parser][property]") {
  const std::set<std::string_view> codes(violation_codes().begin(),
                                         violation_codes().end());
  std::mt19937_64 rng(23);
  for (const auto& file : test::corpus_manifests()) {
    const std::string text = test::read_file(file);
    for (int trial = 0; trial < 40; ++trial) {
      std::string mutated = text;
      // Replace a random line with garbage or a duplicate of another line.
      std::vector<std::size_t> starts{0};
      for (std::size_t i = 0; i < mutated.size(); ++i) {
        if (mutated[i] == '\n' && i + 1 < mutated.size()) starts.push_back(i + 1);
      }
      const auto pick = [&] { return starts[rng() % starts.size()]; };
      const std::size_t a = pick();
      const std::size_t end = mutated.find('\n', a);
      const std::string noise[] = {"  bogus: 1", "x: [", "  - 7", "version: one",
                                   "      shape: [-1]", "name: \"\"", "\t"};
      mutated.replace(a, end - a, noise[rng() % std::size(noise)]);
      const auto vs = lint(mutated);
      for (const auto& v : vs) CHECK(codes.count(v.code) == 1);
      CHECK(std::is_sorted(vs.begin(), vs.end(), [](const auto& x, const auto& y) {
        return x.path < y.path;
      }));
      if (vs.empty()) CHECK_NOTHROW(parse_manifest(mutated));
    }
  }
}

TEST_CASE("corpus manifests are valid", "[parser][corpus]") {
  const auto files = test::corpus_manifests();
  std::map<Kind, int> per_kind;
  for (const auto& f : files) {
    INFO(f.string());
    const std::string text = test::read_file(f);
    const auto vs = lint(text);
    INFO(describe(vs));
    CHECK(vs.empty());
    const Manifest m = parse_manifest(text);
    CHECK(validate(m).empty());
    per_kind[manifest_kind(m)]++;
    const std::string stem = f.filename().string();
    CHECK(stem == manifest_id(m).name + ".dlspec.yml");
  }
  CHECK(files.size() >= 12);
  for (Kind k : kAllKinds) CHECK(per_kind[k] >= 3);
}

TEST_CASE("serialize is canonical and round-trips the corpus", "[parser][corpus]") {
  for (const auto& f : test::corpus_manifests()) {
    INFO(f.string());
    const Manifest m = parse_manifest(test::read_file(f));
    const std::string once = serialize(m);
    const Manifest back = parse_manifest(once);
    CHECK(back == m);
    CHECK(serialize(back) == once);
  }
}

TEST_CASE("generated manifests round-trip", "[parser][property]") {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 500; ++i) {
    const Manifest m = test::random_manifest(rng);
    const auto problems = validate(m);
    INFO(describe(problems));
    REQUIRE(problems.empty());
    const std::string text = serialize(m);
    INFO(text);
    const Manifest back = parse_manifest(text);
    CHECK(back == m);
    CHECK(serialize(back) == text);
  }
}

TEST_CASE("field order does not affect serialization", "[parser]") {
  const std::string a =
      "kind: software\nname: s\nversion: 1.0.0\nsoftware:\n"
      "  container_image: img:1\n  env:\n    B: \"2\"\n    A: \"1\"\n";
  const std::string b =
      "software:\n  env: {A: \"1\", B: \"2\"}\n  container_image: img:1\n"
      "version: 1.0.0\nname: s\nkind: software\n";
  CHECK(serialize(parse_manifest(a)) == serialize(parse_manifest(b)));
}

TEST_CASE("prerelease versions survive serialization", "[parser]") {
  const std::string text =
      "kind: hardware\nname: h\nversion: 1.0.0-rc.1\nhardware:\n  constraints: []\n";
  const std::string out = serialize(parse_manifest(text));
  CHECK(out.find("version: 1.0.0-rc.1\n") != std::string::npos);
}

TEST_CASE("deleting a required field is reported at its path", "[parser][corpus]") {
  std::vector<fs::path> files = test::corpus_manifests();
  files.push_back(test::corpus_dir() / "reference-logs/synthetic-sum.dlspec.yml");
  std::set<std::string> covered;
  for (const auto& f : files) {
    const std::string text = test::read_file(f);
    const yaml::Node root = yaml::parse(text);
    const std::string kind = root.find("kind")->value();
    for (const auto& req : required_fields()) {
      if (req.kind != kind) continue;
      for (const auto& path : test::expand_template(root, std::string(req.path))) {
        yaml::Node copy = root;
        REQUIRE(test::erase_path(copy, path));
        const auto vs = lint(yaml::emit(copy));
        INFO(f.filename().string() << " without " << path << "\n" << describe(vs));
        CHECK(has_violation(vs, path));
        CHECK(has_errors(vs));
        covered.insert(std::string(req.kind) + ":" + std::string(req.path));
      }
    }
  }
  for (const auto& req : required_fields()) {
    INFO(req.kind << ":" << req.path);
    CHECK(covered.count(std::string(req.kind) + ":" + std::string(req.path)) == 1);
  }
}

TEST_CASE("reference logs", "[parser]") {
  const std::string text =
      test::read_file(test::corpus_dir() / "reference-logs/synthetic-sum.dlspec.yml");
  CHECK(lint(text).empty());
  const ReferenceLog log = parse_reference_log(text);
  CHECK(log.bundle.model.to_string() == "model:synthetic-sum@1.0.0");
  CHECK(log.expected_outputs->digest == "e7f6c011776e8db7cd330b54174fd76f7d0216b612387a5ffcfb81e6f0919683");
  CHECK(parse_reference_log(serialize(log)) == log);

  ReferenceLog bad = log;
  bad.metrics["accuracy"] = std::numeric_limits<double>::infinity();
  bad.created_at = "yesterday";
  const auto vs = validate(bad);
  CHECK(has_violation(vs, "reference_log.metrics.accuracy", "non-finite-metric"));
  CHECK(has_violation(vs, "reference_log.created_at", "invalid-timestamp"));

  std::string swapped = text;
  swapped.replace(swapped.find("hardware: hardware:"), 19, "hardware: software:");
  CHECK(has_violation(lint(swapped), "reference_log.bundle.hardware", "invalid-value"));
}

TEST_CASE("bundle consistency", "[parser]") {
  auto load = [](const std::string& rel) {
    return parse_manifest(test::read_file(test::corpus_dir() / rel));
  };
  TaskBundle b;
  b.hardware = std::get<HardwareManifest>(load("hardware/any-linux.dlspec.yml"));
  b.software = std::get<SoftwareManifest>(load("software/python-synthetic.dlspec.yml"));
  b.dataset = std::get<DatasetManifest>(load("dataset/synthetic-ints.dlspec.yml"));
  b.model = std::get<ModelManifest>(load("model/synthetic-sum.dlspec.yml"));
  CHECK(validate_bundle(b).empty());

  b.model = std::get<ModelManifest>(load("model/mnist-trainer.dlspec.yml"));
  b.dataset.split = Split::test;
  const auto vs = validate_bundle(b);
  REQUIRE(vs.size() == 1);
  CHECK(vs[0].code == "split-task-mismatch");
  CHECK(vs[0].severity == Severity::warning);
  CHECK_FALSE(has_errors(vs));

  std::vector<Manifest> parts = {load("hardware/any-linux.dlspec.yml"),
                                 load("model/resnet50.dlspec.yml"),
                                 load("model/synthetic-sum.dlspec.yml")};
  const auto comp = validate_composition(parts);
  CHECK(has_violation(comp, "model", "duplicate-kind"));
  CHECK(has_violation(comp, "software", "missing-kind"));
  CHECK(has_violation(comp, "dataset", "missing-kind"));
}

TEST_CASE("peek_kind", "[parser]") {
  CHECK(peek_kind(kMinimalHardware) == "hardware");
  CHECK(peek_kind("kind: reference-log\n") == "reference-log");
  CHECK(peek_kind("[").empty());
  CHECK(peek_kind("- a\n").empty());
}
