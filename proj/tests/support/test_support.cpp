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

#include "test_support.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dlspec/parser.hpp"

namespace dlspec::test {

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

template <typename T>
T pick(std::mt19937_64& rng, const std::vector<T>& options) {
  std::uniform_int_distribution<std::size_t> d(0, options.size() - 1);
  return options[d(rng)];
}

int uniform(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool coin(std::mt19937_64& rng) { return uniform(rng, 0, 1) == 1; }

std::string random_name(std::mt19937_64& rng) {
  static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789_.-";
  std::string s;
  const int n = uniform(rng, 1, 12);
  for (int i = 0; i < n; ++i) s += alphabet[uniform(rng, 0, 38)];
  return s;
}

// Free text including characters that force quoting.
std::string random_text(std::mt19937_64& rng) {
  static const std::vector<std::string> atoms = {
      "a",   "Z",   "0",  "1.5", " ",   ":",     ": ",   "#",   " #", "-",
      "'",   "\"",  "\\", "true", "null", "~",   "[",    "]",   "{",  ",",
      "*",   "&",   "!",  "%",    "@",    "`",   "\t",   "é",   "→",  "日本",
      "123", "0x1F", ".inf", "yes", "key: v", "---", "...", "|", ">", "?"};
  std::string s;
  const int n = uniform(rng, 0, 6);
  for (int i = 0; i < n; ++i) s += pick(rng, atoms);
  return s;
}

std::string random_source(std::mt19937_64& rng) {
  static const std::vector<std::string> lines = {
      "    return data",
      "    x = ctx[\"inputs\"][0]",
      "",
      "  ",
      "    # comment: with colon",
      "\treturn [d for d in data]",
      "    s = \"quoted \\\"text\\\"\"",
      "import os",
      "    y = {'a': 1}",
      "    return data  # trailing",
  };
  std::string s;
  if (coin(rng)) s += pick(rng, lines) + "\n";
  s += "def fun(ctx, data):\n";
  const int n = uniform(rng, 0, 5);
  for (int i = 0; i < n; ++i) s += pick(rng, lines) + "\n";
  s += "    return data";
  switch (uniform(rng, 0, 2)) {
    case 0: break;
    case 1: s += "\n"; break;
    default: s += "\n\n"; break;
  }
  return s;
}

Scalar random_scalar(std::mt19937_64& rng) {
  switch (uniform(rng, 0, 3)) {
    case 0: return Scalar{coin(rng)};
    case 1:
      return Scalar{static_cast<std::int64_t>(
          std::uniform_int_distribution<std::int64_t>(-1000000, 1000000)(rng))};
    case 2: {
      const double mag = std::pow(10.0, uniform(rng, -8, 12));
      return Scalar{std::uniform_real_distribution<double>(-1, 1)(rng) * mag};
    }
    default: return Scalar{random_text(rng)};
  }
}

ResourceRef random_resource(std::mt19937_64& rng) {
  static const std::vector<std::string> prefixes = {
      "https://zenodo.org/record/", "http://example.org/data/",
      "ftp://ftp.example.org/pub/", "file:///srv/data/"};
  static const char* hex = "0123456789abcdef";
  ResourceRef r;
  r.url = pick(rng, prefixes) + random_name(rng);
  std::string digest;
  for (int i = 0; i < 64; ++i) digest += hex[uniform(rng, 0, 15)];
  r.checksum = Checksum{"sha256", digest};
  r.unpack = pick(rng, std::vector<Unpack>{Unpack::none, Unpack::tar,
                                           Unpack::tar_gz, Unpack::zip});
  return r;
}

ManifestId random_id(std::mt19937_64& rng, Kind kind) {
  return ManifestId{kind, random_name(rng), random_version(rng)};
}

HardwareManifest random_hardware(std::mt19937_64& rng) {
  HardwareManifest m;
  m.id = random_id(rng, Kind::hardware);
  const int n = uniform(rng, 0, 5);
  for (int i = 0; i < n; ++i) {
    Constraint c;
    c.key = "key" + std::to_string(i) + (coin(rng) ? ".sub" : "");
    c.op = pick(rng, std::vector<ConstraintOp>{
                         ConstraintOp::eq, ConstraintOp::ne, ConstraintOp::ge,
                         ConstraintOp::le, ConstraintOp::in,
                         ConstraintOp::matches});
    switch (c.op) {
      case ConstraintOp::in: {
        std::vector<Scalar> items;
        for (int k = uniform(rng, 0, 3); k > 0; --k) {
          items.push_back(random_scalar(rng));
        }
        c.value = items;
        break;
      }
      case ConstraintOp::matches:
        c.value = Scalar{pick(rng, std::vector<std::string>{
                                       "x86_.*", "Tesla [A-Z]+", "^arm(64)?$"})};
        break;
      case ConstraintOp::ge:
      case ConstraintOp::le:
        c.value = Scalar{static_cast<std::int64_t>(uniform(rng, 0, 512))};
        break;
      default:
        c.value = random_scalar(rng);
    }
    m.constraints.push_back(std::move(c));
  }
  for (auto* list : {&m.setup, &m.teardown}) {
    for (int k = uniform(rng, 0, 2); k > 0; --k) {
      SetupCommand cmd;
      cmd.argv.push_back("cmd" + std::to_string(k));
      for (int a = uniform(rng, 0, 3); a > 0; --a) {
        cmd.argv.push_back(random_text(rng));
      }
      cmd.must_succeed = coin(rng);
      cmd.description = random_text(rng);
      list->push_back(std::move(cmd));
    }
  }
  return m;
}

SoftwareManifest random_software(std::mt19937_64& rng) {
  SoftwareManifest m;
  m.id = random_id(rng, Kind::software);
  m.container_image = "registry.example.org/" + random_name(rng) + ":" +
                      std::to_string(uniform(rng, 0, 99));
  for (int k = uniform(rng, 0, 4); k > 0; --k) {
    m.env["VAR_" + std::to_string(k)] = random_text(rng);
  }
  if (coin(rng)) {
    m.framework["name"] = random_text(rng);
    m.framework["version"] = random_version(rng).to_string();
  }
  return m;
}

DatasetManifest random_dataset(std::mt19937_64& rng) {
  DatasetManifest m;
  m.id = random_id(rng, Kind::dataset);
  m.split = pick(rng, std::vector<Split>{Split::training, Split::validation,
                                         Split::test});
  for (int k = uniform(rng, 1, 3); k > 0; --k) {
    m.resources.push_back(random_resource(rng));
  }
  m.element_listing.glob =
      pick(rng, std::vector<std::string>{"**", "**/*.jpg", "val/*", "*.txt"});
  return m;
}

IOSpec random_io(std::mt19937_64& rng, int index) {
  IOSpec io;
  io.name = "t" + std::to_string(index) + random_text(rng);
  io.element_type = pick(rng, std::vector<ElementType>{
                                  ElementType::float32, ElementType::float64,
                                  ElementType::int32, ElementType::int64,
                                  ElementType::uint8, ElementType::string,
                                  ElementType::bytes});
  if (coin(rng)) {
    std::vector<Dim> dims;
    for (int k = uniform(rng, 0, 4); k > 0; --k) {
      if (coin(rng)) {
        dims.emplace_back(std::nullopt);
      } else {
        dims.emplace_back(uniform(rng, 1, 4096));
      }
    }
    io.shape = dims;
  }
  if (coin(rng)) io.layout = pick(rng, std::vector<std::string>{"NCHW", "NHWC", "HW C"});
  return io;
}

ModelManifest random_model(std::mt19937_64& rng) {
  ModelManifest m;
  m.id = random_id(rng, Kind::model);
  m.task_kind = coin(rng) ? TaskKind::inference : TaskKind::training;
  const int min_io = m.task_kind == TaskKind::inference ? 1 : 0;
  for (int k = uniform(rng, min_io, 3); k > 0; --k) {
    m.inputs.push_back(random_io(rng, k));
  }
  for (int k = uniform(rng, min_io, 3); k > 0; --k) {
    m.outputs.push_back(random_io(rng, k));
  }
  for (int k = uniform(rng, 0, 2); k > 0; --k) {
    m.artifacts.push_back(random_resource(rng));
  }
  if (coin(rng)) m.pre_processing.source = random_source(rng);
  m.run.source = random_source(rng);
  if (coin(rng)) m.post_processing.source = random_source(rng);
  for (int k = uniform(rng, 0, 4); k > 0; --k) {
    m.hyperparameters[random_text(rng) + std::to_string(k)] = random_scalar(rng);
  }
  return m;
}

struct PathStep {
  std::string key;  // empty for an index step
  std::size_t index = 0;
};

std::vector<PathStep> split_path(const std::string& path) {
  std::vector<PathStep> steps;
  std::size_t i = 0;
  while (i < path.size()) {
    if (path[i] == '.') {
      ++i;
      continue;
    }
    if (path[i] == '[') {
      const auto close = path.find(']', i);
      steps.push_back(PathStep{"", std::stoul(path.substr(i + 1, close - i - 1))});
      i = close + 1;
      continue;
    }
    const auto end = path.find_first_of(".[", i);
    steps.push_back(PathStep{path.substr(i, end == std::string::npos
                                                ? std::string::npos
                                                : end - i),
                             0});
    i = end == std::string::npos ? path.size() : end;
  }
  return steps;
}

yaml::Node* step_into(yaml::Node* n, const PathStep& s) {
  if (!n) return nullptr;
  if (s.key.empty()) {
    if (!n->is_sequence() || s.index >= n->items().size()) return nullptr;
    return &n->items()[s.index];
  }
  if (!n->is_mapping()) return nullptr;
  return n->find(s.key);
}

void expand(const yaml::Node* node, const std::string& prefix,
            const std::string& rest, std::vector<std::string>& out) {
  const auto star = rest.find("[*]");
  if (star == std::string::npos) {
    yaml::Node copy = *node;
    yaml::Node* cur = &copy;
    for (const auto& s : split_path(prefix + rest)) cur = step_into(cur, s);
    if (cur) out.push_back(prefix + rest);
    return;
  }
  const std::string seq_path = prefix + rest.substr(0, star);
  yaml::Node copy = *node;
  yaml::Node* cur = &copy;
  for (const auto& s : split_path(seq_path)) cur = step_into(cur, s);
  if (!cur || !cur->is_sequence()) return;
  for (std::size_t i = 0; i < cur->items().size(); ++i) {
    expand(node, seq_path + "[" + std::to_string(i) + "]",
           rest.substr(star + 3), out);
  }
}

}  // namespace

TempDir::TempDir() {
  std::string templ = (fs::temp_directory_path() / "dlspec-test-XXXXXX").string();
  if (!mkdtemp(templ.data())) throw std::runtime_error("mkdtemp failed");
  path_ = templ;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

fs::path source_dir() { return DLSPEC_SOURCE_DIR; }
fs::path corpus_dir() { return source_dir() / "corpus"; }

std::vector<fs::path> corpus_manifests() {
  std::vector<fs::path> out;
  for (const char* kind : {"hardware", "software", "dataset", "model"}) {
    for (const auto& e : fs::directory_iterator(corpus_dir() / kind)) {
      if (e.path().string().ends_with(".dlspec.yml")) out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string oracle_sha256(const fs::path& p) {
  auto [status, output] = run_command({"sha256sum", p.string()});
  if (status != 0 || output.size() < 64) {
    throw std::runtime_error("sha256sum failed: " + output);
  }
  return output.substr(0, 64);
}

std::string oracle_sha256_of(const std::string& content) {
  TempDir dir;
  write_file(dir / "blob", content);
  return oracle_sha256(dir / "blob");
}

std::string file_url(const fs::path& p) {
  return "file://" + fs::absolute(p).string();
}

Version random_version(std::mt19937_64& rng, bool allow_prerelease) {
  Version v;
  v.major = static_cast<std::uint64_t>(uniform(rng, 0, 3));
  v.minor = static_cast<std::uint64_t>(uniform(rng, 0, 3));
  v.patch = static_cast<std::uint64_t>(uniform(rng, 0, 3));
  if (allow_prerelease && uniform(rng, 0, 3) == 0) {
    for (int k = uniform(rng, 1, 2); k > 0; --k) {
      v.prerelease.push_back(pick(rng, std::vector<std::string>{
                                           "alpha", "beta", "rc", "0", "1",
                                           "2", "11", "x-y"}));
    }
  }
  return v;
}

Manifest random_manifest(std::mt19937_64& rng) {
  switch (uniform(rng, 0, 3)) {
    case 0: return random_hardware(rng);
    case 1: return random_software(rng);
    case 2: return random_dataset(rng);
    default: return random_model(rng);
  }
}

bool erase_path(yaml::Node& root, const std::string& path) {
  auto steps = split_path(path);
  if (steps.empty()) return false;
  yaml::Node* cur = &root;
  for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
    cur = step_into(cur, steps[i]);
  }
  if (!cur) return false;
  const PathStep& last = steps.back();
  if (last.key.empty()) {
    if (!cur->is_sequence() || last.index >= cur->items().size()) return false;
    cur->items().erase(cur->items().begin() +
                       static_cast<std::ptrdiff_t>(last.index));
    return true;
  }
  return cur->is_mapping() && cur->erase(last.key);
}

std::vector<std::string> expand_template(const yaml::Node& root,
                                         const std::string& templ) {
  std::vector<std::string> out;
  expand(&root, "", templ, out);
  return out;
}

std::pair<int, std::string> run_command(const std::vector<std::string>& argv,
                                        const std::vector<std::string>& env) {
  std::string cmd;
  if (!env.empty()) {
    cmd = "env";
    for (const auto& e : env) cmd += " " + shell_quote(e);
    cmd += " ";
  }
  for (std::size_t i = 0; i < argv.size(); ++i) {
    if (i) cmd += ' ';
    cmd += shell_quote(argv[i]);
  }
  cmd += " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  std::string output;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) {
    output.append(buf.data(), n);
  }
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status),
          output};
}

TaskBundle random_bundle(std::mt19937_64& rng) {
  return {random_hardware(rng), random_software(rng), random_dataset(rng), random_model(rng)};
}

TaskBundle synthetic_bundle(const fs::path& data_dir) {
  fs::create_directories(data_dir);
  TaskBundle b;
  b.hardware = std::get<HardwareManifest>(
      parse_manifest(read_file(corpus_dir() / "hardware/any-linux.dlspec.yml")));
  b.software = std::get<SoftwareManifest>(
      parse_manifest(read_file(corpus_dir() / "software/python-synthetic.dlspec.yml")));
  b.dataset = std::get<DatasetManifest>(
      parse_manifest(read_file(corpus_dir() / "dataset/synthetic-ints.dlspec.yml")));
  b.model = std::get<ModelManifest>(
      parse_manifest(read_file(corpus_dir() / "model/synthetic-sum.dlspec.yml")));
  for (std::size_t i = 0; i < b.dataset.resources.size(); ++i) {
    const fs::path f = data_dir / (std::to_string(i + 1) + ".txt");
    write_file(f, std::to_string(i + 1) + "\n");
    b.dataset.resources[i].url = file_url(f);
  }
  return b;
}

HostDescription ci_host() {
  return parse_host_file(read_file(corpus_dir() / "hosts/ci-host.dlspec.yml"));
}

}  // namespace dlspec::test
