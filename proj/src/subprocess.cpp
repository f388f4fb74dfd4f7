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

#include "dlspec/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <mutex>
#include <thread>

#include "dlspec/error.hpp"

extern char** environ;

namespace dlspec {

namespace {

constexpr std::size_t kStderrLimit = 64 * 1024;

void ignore_sigpipe_once() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

struct Pipe {
  int read = -1;
  int write = -1;
  Pipe() {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) {
      throw Error(Errc::spawn_failure, std::string("pipe: ") + std::strerror(errno));
    }
    read = fds[0];
    write = fds[1];
  }
};

void close_fd(int& fd) {
  if (fd >= 0) {
    ::close(fd);
    fd = -1;
  }
}

std::vector<std::string> build_env(const SpawnOptions& o) {
  std::map<std::string, std::string> merged;
  if (!o.clear_env) {
    for (char** e = environ; e && *e; ++e) {
      std::string_view kv(*e);
      const auto eq = kv.find('=');
      if (eq == std::string_view::npos) continue;
      merged[std::string(kv.substr(0, eq))] = std::string(kv.substr(eq + 1));
    }
  }
  for (const auto& [k, v] : o.env) merged[k] = v;
  std::vector<std::string> out;
  out.reserve(merged.size());
  for (const auto& [k, v] : merged) out.push_back(k + "=" + v);
  return out;
}

// Spawns with the given descriptors on 0, 1 and 2, in a new process group.
pid_t spawn_with(const SpawnOptions& o, int in, int out, int err) {
  if (o.argv.empty() || o.argv.front().empty()) {
    throw Error(Errc::spawn_failure, "empty command");
  }
  ignore_sigpipe_once();
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_adddup2(&fa, in, 0);
  posix_spawn_file_actions_adddup2(&fa, out, 1);
  posix_spawn_file_actions_adddup2(&fa, err, 2);
  if (o.cwd) posix_spawn_file_actions_addchdir_np(&fa, o.cwd->c_str());

  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  sigset_t defaults, empty;
  sigemptyset(&defaults);
  sigaddset(&defaults, SIGPIPE);
  sigemptyset(&empty);
  posix_spawnattr_setsigdefault(&attr, &defaults);
  posix_spawnattr_setsigmask(&attr, &empty);
  posix_spawnattr_setpgroup(&attr, 0);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETSIGDEF | POSIX_SPAWN_SETSIGMASK |
                                      POSIX_SPAWN_SETPGROUP);

  std::vector<char*> argv;
  for (const auto& a : o.argv) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  std::vector<std::string> env = build_env(o);
  std::vector<char*> envp;
  for (auto& e : env) envp.push_back(e.data());
  envp.push_back(nullptr);

  pid_t pid = -1;
  const int rc = o.argv.front().find('/') == std::string::npos
                     ? posix_spawnp(&pid, argv[0], &fa, &attr, argv.data(), envp.data())
                     : posix_spawn(&pid, argv[0], &fa, &attr, argv.data(), envp.data());
  posix_spawn_file_actions_destroy(&fa);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) {
    throw Error(Errc::spawn_failure,
                "cannot start '" + o.argv.front() + "': " + std::strerror(rc));
  }
  return pid;
}

ExitStatus decode(int status) {
  ExitStatus s;
  if (WIFEXITED(status)) {
    s.code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    s.signal = WTERMSIG(status);
  }
  return s;
}

std::optional<ExitStatus> try_reap(pid_t pid) {
  int status = 0;
  const pid_t r = ::waitpid(pid, &status, WNOHANG);
  if (r == pid) return decode(status);
  if (r < 0 && errno == ECHILD) return ExitStatus{};
  return std::nullopt;
}

ExitStatus reap(pid_t pid) {
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) return ExitStatus{};
  }
  return decode(status);
}

int remaining_ms(std::chrono::steady_clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<Millis>(deadline - std::chrono::steady_clock::now());
  return left.count() < 0 ? 0 : static_cast<int>(std::min<long long>(left.count(), 1 << 30));
}

}  // namespace

std::string ExitStatus::to_string() const {
  if (signal != 0) return "killed by signal " + std::to_string(signal);
  return "exit status " + std::to_string(code);
}

std::filesystem::path find_program(std::string_view name) {
  if (name.empty()) return {};
  if (name.find('/') != std::string_view::npos) {
    return ::access(std::string(name).c_str(), X_OK) == 0 ? std::filesystem::path(name)
                                                           : std::filesystem::path();
  }
  const char* path = std::getenv("PATH");
  std::string_view dirs = path ? path : "/usr/bin:/bin";
  while (true) {
    const auto colon = dirs.find(':');
    const std::string_view dir = dirs.substr(0, colon);
    const std::filesystem::path candidate =
        std::filesystem::path(dir.empty() ? "." : std::string(dir)) / std::string(name);
    if (::access(candidate.c_str(), X_OK) == 0 && !std::filesystem::is_directory(candidate)) {
      return candidate;
    }
    if (colon == std::string_view::npos) break;
    dirs.remove_prefix(colon + 1);
  }
  return {};
}

ProcessResult run_process(const SpawnOptions& options, Millis timeout, std::string_view input) {
  Pipe in, out;
  pid_t pid = -1;
  try {
    pid = spawn_with(options, in.read, out.write, out.write);
  } catch (...) {
    for (int* fd : {&in.read, &in.write, &out.read, &out.write}) close_fd(*fd);
    throw;
  }
  close_fd(in.read);
  close_fd(out.write);
  if (input.empty()) close_fd(in.write);

  const bool bounded = timeout.count() > 0;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  ProcessResult result;
  std::size_t written = 0;
  char buf[8192];
  while (out.read >= 0) {
    pollfd fds[2] = {{out.read, POLLIN, 0}, {in.write, POLLOUT, 0}};
    const nfds_t n = in.write >= 0 ? 2 : 1;
    const int wait = bounded ? remaining_ms(deadline) : -1;
    const int r = ::poll(fds, n, wait);
    if (r < 0 && errno == EINTR) continue;
    if (r == 0) {
      result.timed_out = true;
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      break;
    }
    if (n == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t w = ::write(in.write, input.data() + written, input.size() - written);
      if (w > 0) written += static_cast<std::size_t>(w);
      if (w < 0 || written == input.size()) close_fd(in.write);
    }
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      const ssize_t got = ::read(out.read, buf, sizeof buf);
      if (got > 0) {
        result.output.append(buf, static_cast<std::size_t>(got));
      } else if (got == 0 || errno != EINTR) {
        close_fd(out.read);
      }
    }
  }
  close_fd(out.read);
  close_fd(in.write);
  result.status = reap(pid);
  return result;
}

struct ChildProcess::Impl {
  int err_fd = -1;
  std::thread reader;
  mutable std::mutex mu;
  std::string err;
  std::atomic<bool> eof{false};
};

std::unique_ptr<ChildProcess> ChildProcess::spawn(const SpawnOptions& options) {
  Pipe in, out, err;
  pid_t pid = -1;
  try {
    pid = spawn_with(options, in.read, out.write, err.write);
  } catch (...) {
    for (int* fd : {&in.read, &in.write, &out.read, &out.write, &err.read, &err.write}) {
      close_fd(*fd);
    }
    throw;
  }
  close_fd(in.read);
  close_fd(out.write);
  close_fd(err.write);
  std::unique_ptr<ChildProcess> child(new ChildProcess());
  child->impl_ = std::make_unique<Impl>();
  child->pid_ = pid;
  child->in_fd_ = in.write;
  child->out_fd_ = out.read;
  Impl* impl = child->impl_.get();
  impl->err_fd = err.read;
  impl->reader = std::thread([impl] {
    char buf[4096];
    while (true) {
      const ssize_t got = ::read(impl->err_fd, buf, sizeof buf);
      if (got < 0 && errno == EINTR) continue;
      if (got <= 0) break;
      std::lock_guard<std::mutex> lock(impl->mu);
      impl->err.append(buf, static_cast<std::size_t>(got));
      if (impl->err.size() > kStderrLimit) {
        impl->err.erase(0, impl->err.size() - kStderrLimit);
      }
    }
    impl->eof = true;
  });
  return child;
}

ChildProcess::~ChildProcess() {
  if (!status_) terminate(Millis{0});
  close_fd(in_fd_);
  close_fd(out_fd_);
  if (impl_) {
    if (impl_->reader.joinable()) impl_->reader.join();
    close_fd(impl_->err_fd);
  }
}

bool ChildProcess::write_all(std::string_view bytes) {
  if (in_fd_ < 0) return false;
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t w = ::write(in_fd_, bytes.data() + done, bytes.size() - done);
    if (w < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    done += static_cast<std::size_t>(w);
  }
  return true;
}

bool ChildProcess::read_exact(char* buf, std::size_t n,
                              std::chrono::steady_clock::time_point deadline) {
  std::size_t done = 0;
  while (done < n) {
    if (out_fd_ < 0) return false;
    pollfd fd{out_fd_, POLLIN, 0};
    const int r = ::poll(&fd, 1, remaining_ms(deadline));
    if (r < 0 && errno == EINTR) continue;
    if (r == 0) throw Error(Errc::handshake_timeout, "timed out waiting for the worker");
    const ssize_t got = ::read(out_fd_, buf + done, n - done);
    if (got < 0 && errno == EINTR) continue;
    if (got <= 0) return false;
    done += static_cast<std::size_t>(got);
  }
  return true;
}

void ChildProcess::close_stdin() { close_fd(in_fd_); }

std::optional<ExitStatus> ChildProcess::wait_for(Millis timeout) {
  if (status_) return status_;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    if (auto s = try_reap(pid_)) {
      status_ = *s;
      return status_;
    }
    if (std::chrono::steady_clock::now() >= deadline) return std::nullopt;
    std::this_thread::sleep_for(Millis{5});
  }
}

ExitStatus ChildProcess::terminate(Millis grace) {
  if (status_) return *status_;
  if (auto s = try_reap(pid_)) {
    status_ = *s;
    return *status_;
  }
  ::kill(-pid_, SIGTERM);
  ::kill(pid_, SIGTERM);
  if (auto s = wait_for(grace)) return *s;
  ::kill(-pid_, SIGKILL);
  ::kill(pid_, SIGKILL);
  status_ = reap(pid_);
  return *status_;
}

std::string ChildProcess::collect_stderr(Millis timeout) const {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!impl_->eof && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(Millis{2});
  }
  return stderr_text();
}

std::string ChildProcess::stderr_text() const {
  std::lock_guard<std::mutex> lock(impl_->mu);
  return impl_->err;
}

}  // namespace dlspec
