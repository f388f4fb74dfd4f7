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

#include "dlspec/gate.hpp"
#include "dlspec/parser.hpp"
#include "test_support.hpp"

using namespace dlspec;

namespace {

Constraint make(std::string key, ConstraintOp op, ConstraintValue value) {
  return Constraint{std::move(key), op, std::move(value)};
}

HostDescription host_of(std::map<std::string, Scalar> values) {
  HostDescription h;
  h.values = std::move(values);
  h.source = HostDescription::Source::declared;
  return h;
}

// Records commands instead of running them.
struct RecordingRunner : CommandRunner {
  std::vector<std::vector<std::string>> seen;
  std::set<std::string> failing;
  ProcessResult run(const SetupCommand& cmd) override {
    seen.push_back(cmd.argv);
    ProcessResult r;
    r.status.code = failing.count(cmd.argv.front()) ? 1 : 0;
    r.output = "ran " + cmd.argv.front();
    return r;
  }
};

SetupCommand cmd(std::string name, bool must = true) {
  return SetupCommand{{std::move(name)}, must, {}};
}

}  // namespace

TEST_CASE("probing the host", "[gate]") {
  const HostDescription a = probe_host();
  for (const char* key : {"architecture", "os", "num_cpus", "memory_gb"}) {
    INFO(key);
    REQUIRE(a.find(key) != nullptr);
  }
  CHECK_FALSE(scalar_text(*a.find("architecture")).empty());
  CHECK(std::get<std::int64_t>(*a.find("num_cpus")) >= 1);
  CHECK(scalar_number(*a.find("memory_gb")) > 0);
  CHECK(a.source == HostDescription::Source::probed);
  CHECK(probe_host() == a);
}

TEST_CASE("declared host files", "[gate]") {
  const HostDescription h =
      parse_host_file(test::read_file(test::corpus_dir() / "hosts/ci-host.dlspec.yml"));
  CHECK(h.source == HostDescription::Source::declared);
  CHECK(scalar_text(*h.find("architecture")) == "x86_64");
  CHECK(std::get<std::int64_t>(*h.find("num_cpus")) == 8);
  CHECK(parse_host_file(serialize(h)).values == h.values);
  CHECK(host_fingerprint(h) == host_fingerprint(parse_host_file(serialize(h))));
  CHECK_THROWS_AS(parse_host_file("kind: host\nhost: {a: [1]}\n"), ManifestError);
  CHECK_THROWS_AS(parse_host_file("kind: model\nhost: {}\n"), ManifestError);
  CHECK_THROWS_AS(parse_host_file("kind: host\nhost: {}\nextra: 1\n"), ManifestError);
}

TEST_CASE("constraint verdicts", "[gate]") {
  const HostDescription h = host_of({{"architecture", std::string("x86_64")},
                                     {"memory_gb", std::int64_t{8}},
                                     {"num_cpus", std::int64_t{16}},
                                     {"cpu.model", std::string("Intel Xeon Gold 6148")},
                                     {"gpu.count", std::int64_t{2}},
                                     {"ratio", 0.5}});
  struct Case {
    Constraint c;
    Verdict v;
  };
  const std::vector<Case> cases = {
      {make("architecture", ConstraintOp::eq, Scalar{std::string("x86_64")}), Verdict::satisfied},
      {make("architecture", ConstraintOp::ne, Scalar{std::string("aarch64")}), Verdict::satisfied},
      {make("memory_gb", ConstraintOp::ge, Scalar{std::int64_t{16}}), Verdict::unsatisfied},
      {make("memory_gb", ConstraintOp::le, Scalar{8.0}), Verdict::satisfied},
      {make("memory_gb", ConstraintOp::eq, Scalar{8.0}), Verdict::satisfied},
      {make("num_cpus", ConstraintOp::ge, Scalar{std::int64_t{16}}), Verdict::satisfied},
      {make("ratio", ConstraintOp::le, Scalar{std::int64_t{1}}), Verdict::satisfied},
      {make("architecture", ConstraintOp::ge, Scalar{std::int64_t{1}}), Verdict::unsatisfied},
      {make("gpu.count", ConstraintOp::in,
            std::vector<Scalar>{std::int64_t{1}, std::int64_t{2}}),
       Verdict::satisfied},
      {make("architecture", ConstraintOp::in, std::vector<Scalar>{std::string("ppc64le")}),
       Verdict::unsatisfied},
      {make("cpu.model", ConstraintOp::matches, Scalar{std::string("Intel Xeon.*")}),
       Verdict::satisfied},
      {make("cpu.model", ConstraintOp::matches, Scalar{std::string("Xeon")}),
       Verdict::unsatisfied},
      {make("cpu.turbo_boost", ConstraintOp::eq, Scalar{std::string("off")}),
       Verdict::unknown_key},
  };
  for (const auto& c : cases) {
    INFO(c.c.key << " " << constraint_op_name(c.c.op));
    const std::vector<Constraint> one = {c.c};
    const GateReport r = evaluate(one, h);
    REQUIRE(r.results.size() == 1);
    CHECK(r.results[0].verdict == c.v);
    CHECK(r.passed() == (c.v == Verdict::satisfied));
  }
}

TEST_CASE("unknown keys fail unless allowed", "[gate]") {
  const HostDescription h = host_of({{"architecture", std::string("x86_64")}});
  const std::vector<Constraint> cs = {
      make("architecture", ConstraintOp::eq, Scalar{std::string("x86_64")}),
      make("cpu.turbo_boost", ConstraintOp::eq, Scalar{std::string("off")})};
  const GateReport strict = evaluate(cs, h);
  CHECK_FALSE(strict.passed());
  CHECK(strict.summary().find("cpu.turbo_boost: unknown-key") != std::string::npos);
  CHECK(evaluate(cs, h, true).passed());
  CHECK(evaluate(cs, h, true).summary().empty());
}

TEST_CASE("the corpus hardware against the declared CI host", "[gate]") {
  const HostDescription h =
      parse_host_file(test::read_file(test::corpus_dir() / "hosts/ci-host.dlspec.yml"));
  auto gate = [&](const char* rel, bool allow = false) {
    const auto m = std::get<HardwareManifest>(
        parse_manifest(test::read_file(test::corpus_dir() / rel)));
    return evaluate(m.constraints, h, allow);
  };
  CHECK(gate("hardware/any-linux.dlspec.yml").passed());
  const GateReport x86 = gate("hardware/x86-server.dlspec.yml");
  CHECK_FALSE(x86.passed());
  CHECK(x86.results[0].verdict == Verdict::satisfied);
  CHECK(x86.results[1].verdict == Verdict::unsatisfied);
  CHECK(x86.results[3].verdict == Verdict::unknown_key);
}

TEST_CASE("evaluate is pure", "[gate][property]") {
  std::mt19937_64 rng(41);
  const HostDescription h = probe_host();
  for (int i = 0; i < 200; ++i) {
    const auto m = test::random_manifest(rng);
    if (!std::holds_alternative<HardwareManifest>(m)) continue;
    const auto& cs = std::get<HardwareManifest>(m).constraints;
    const GateReport a = evaluate(cs, h);
    const GateReport b = evaluate(cs, h);
    REQUIRE(a.results.size() == b.results.size());
    for (std::size_t k = 0; k < a.results.size(); ++k) {
      CHECK(a.results[k].verdict == b.results[k].verdict);
      CHECK(a.results[k].detail == b.results[k].detail);
    }
  }
}

TEST_CASE("setup commands", "[gate]") {
  SECTION("a no-op command succeeds") {
    Counters counters;
    HostCommandRunner runner(&counters);
    const std::vector<SetupCommand> cmds = {SetupCommand{{"true"}, true, "noop"}};
    const SetupReport r = run_setup(cmds, SetupMode::execute, runner);
    REQUIRE(r.entries.size() == 1);
    CHECK(r.entries[0].executed);
    CHECK(r.entries[0].status.success());
    CHECK(counters.setup_commands == 1);
  }
  SECTION("output is captured") {
    HostCommandRunner runner;
    const std::vector<SetupCommand> cmds = {SetupCommand{{"sh", "-c", "echo hello; echo err >&2"}, true, ""}};
    const SetupReport r = run_setup(cmds, SetupMode::execute, runner);
    CHECK(r.entries[0].output == "hello\nerr\n");
  }
  SECTION("a must_succeed failure stops the sequence") {
    HostCommandRunner runner;
    const std::vector<SetupCommand> cmds = {
        SetupCommand{{"sh", "-c", "echo first"}, true, ""},
        SetupCommand{{"sh", "-c", "echo broken; exit 3"}, true, ""},
        SetupCommand{{"sh", "-c", "echo never"}, true, ""}};
    try {
      run_setup(cmds, SetupMode::execute, runner);
      FAIL("expected command-failed");
    } catch (const SetupError& e) {
      CHECK(e.code() == Errc::command_failed);
      REQUIRE(e.report().entries.size() == 2);
      CHECK(e.report().entries[0].output == "first\n");
      CHECK(e.report().entries[1].status.code == 3);
      CHECK(std::string(e.what()).find("broken") != std::string::npos);
    }
  }
  SECTION("optional failures continue") {
    RecordingRunner runner;
    runner.failing = {"b"};
    const std::vector<SetupCommand> cmds = {cmd("a"), cmd("b", false), cmd("c")};
    const SetupReport r = run_setup(cmds, SetupMode::execute, runner);
    CHECK(r.entries.size() == 3);
    CHECK(runner.seen == std::vector<std::vector<std::string>>{{"a"}, {"b"}, {"c"}});
  }
  SECTION("missing programs count as failures") {
    HostCommandRunner runner;
    const std::vector<SetupCommand> cmds = {cmd("/nonexistent/dlspec-tool")};
    CHECK_THROWS_AS(run_setup(cmds, SetupMode::execute, runner), SetupError);
  }
  SECTION("dry run plans without executing") {
    RecordingRunner runner;
    const std::vector<SetupCommand> cmds = {cmd("a"), cmd("b"), cmd("c")};
    const SetupReport r = run_setup(cmds, SetupMode::dry_run, runner);
    CHECK(r.entries.size() == 3);
    CHECK(runner.seen.empty());
    for (const auto& e : r.entries) CHECK_FALSE(e.executed);
  }
}

TEST_CASE("teardown undoes successful setups in reverse", "[gate]") {
  RecordingRunner runner;
  runner.failing = {"s1"};
  const std::vector<SetupCommand> setup = {cmd("s0"), cmd("s1", false), cmd("s2")};
  const std::vector<SetupCommand> teardown = {cmd("t0"), cmd("t1"), cmd("t2"), cmd("t3")};
  const SetupReport done = run_setup(setup, SetupMode::execute, runner);
  runner.seen.clear();
  const SetupReport td = run_teardown(teardown, setup.size(), done.entries, SetupMode::execute, runner);
  CHECK(runner.seen == std::vector<std::vector<std::string>>{{"t3"}, {"t2"}, {"t0"}});
  CHECK(td.entries.size() == 3);

  SECTION("after an aborted setup only the completed prefix is undone") {
    RecordingRunner r2;
    r2.failing = {"s1"};
    const std::vector<SetupCommand> strict = {cmd("s0"), cmd("s1"), cmd("s2")};
    std::vector<CommandOutcome> partial;
    try {
      run_setup(strict, SetupMode::execute, r2);
    } catch (const SetupError& e) {
      partial = e.report().entries;
    }
    r2.seen.clear();
    run_teardown(teardown, strict.size(), partial, SetupMode::execute, r2);
    CHECK(r2.seen == std::vector<std::vector<std::string>>{{"t3"}, {"t0"}});
  }
  SECTION("teardown failures are recorded, not thrown") {
    RecordingRunner r3;
    r3.failing = {"t2"};
    const SetupReport out = run_teardown(teardown, setup.size(), done.entries, SetupMode::execute, r3);
    CHECK(out.entries.size() == 3);
    CHECK_FALSE(out.entries[1].ok());
  }
}
