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

#include <chrono>
#include <thread>

#include "dlspec/error.hpp"
#include "dlspec/subprocess.hpp"
#include "test_support.hpp"

using namespace dlspec;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

TEST_CASE("run_process captures output and status", "[subprocess]") {
  const auto r = run_process({{"sh", "-c", "echo out; echo err >&2; exit 7"}, {}, {}, false});
  CHECK(r.status.code == 7);
  CHECK_FALSE(r.status.success());
  CHECK(r.output == "out\nerr\n");
  CHECK_FALSE(r.timed_out);
}

TEST_CASE("run_process feeds stdin, env and cwd", "[subprocess]") {
  test::TempDir dir;
  SpawnOptions o;
  o.argv = {"sh", "-c", "cat; echo \"$DLSPEC_T\"; pwd"};
  o.env = {{"DLSPEC_T", "v a l"}};
  o.cwd = dir.path();
  const auto r = run_process(o, 0ms, "piped\n");
  CHECK(r.output == "piped\nv a l\n" + fs::canonical(dir.path()).string() + "\n");

  SpawnOptions clear;
  clear.argv = {"/usr/bin/env"};
  clear.clear_env = true;
  clear.env = {{"ONLY", "1"}};
  CHECK(run_process(clear).output == "ONLY=1\n");
}

TEST_CASE("run_process timeouts kill the process group", "[subprocess]") {
  const auto start = std::chrono::steady_clock::now();
  const auto r = run_process({{"sh", "-c", "sleep 30 & sleep 30"}, {}, {}, false}, 200ms);
  CHECK(r.timed_out);
  CHECK(r.status.signal != 0);
  CHECK(std::chrono::steady_clock::now() - start < 5s);
}

TEST_CASE("missing programs are spawn failures", "[subprocess]") {
  try {
    run_process({{"dlspec-no-such-program"}, {}, {}, false});
    FAIL("expected spawn-failure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::spawn_failure);
  }
  CHECK(find_program("sh").filename() == "sh");
  CHECK(find_program("dlspec-no-such-program").empty());
}

TEST_CASE("child processes talk over pipes", "[subprocess]") {
  auto child = ChildProcess::spawn({{"sh", "-c", "echo warn >&2; head -c 5; exit 4"}, {}, {}, false});
  REQUIRE(child->write_all("hello world"));
  char buf[5];
  REQUIRE(child->read_exact(buf, 5, std::chrono::steady_clock::now() + 5s));
  CHECK(std::string(buf, 5) == "hello");
  const auto status = child->wait_for(5s);
  REQUIRE(status.has_value());
  CHECK(status->code == 4);
  char more;
  CHECK_FALSE(child->read_exact(&more, 1, std::chrono::steady_clock::now() + 1s));
  child.reset();
}

TEST_CASE("reads time out and terminate escalates", "[subprocess]") {
  auto child = ChildProcess::spawn({{"sh", "-c", "trap '' TERM; sleep 30"}, {}, {}, false});
  char buf[1];
  CHECK_THROWS_AS(child->read_exact(buf, 1, std::chrono::steady_clock::now() + 100ms), Error);
  const auto start = std::chrono::steady_clock::now();
  const ExitStatus s = child->terminate(200ms);
  CHECK(s.signal != 0);
  CHECK(std::chrono::steady_clock::now() - start < 5s);
  CHECK(child->exit_status().has_value());
  CHECK(child->terminate(0ms).signal == s.signal);
}

TEST_CASE("stderr is kept", "[subprocess]") {
  auto child = ChildProcess::spawn({{"sh", "-c", "echo diagnostic >&2"}, {}, {}, false});
  REQUIRE(child->wait_for(5s).has_value());
  for (int i = 0; i < 100 && child->stderr_text().empty(); ++i) {
    std::this_thread::sleep_for(10ms);
  }
  CHECK(child->stderr_text() == "diagnostic\n");
}
