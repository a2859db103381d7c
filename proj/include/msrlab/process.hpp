#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "msrlab/error.hpp"

extern char** environ;

namespace msrlab {

struct ProcessResult {
  int exit_code = 0;
  std::string out;
  std::string err;
};

class SpawnError : public Error {
 public:
  SpawnError(const std::string& what, int err) : Error(what), errno_(err) {}
  int error_number() const noexcept { return errno_; }

 private:
  int errno_;
};

namespace detail {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = o.fd_;
      o.fd_ = -1;
    }
    return *this;
  }
  ~Fd() { reset(); }
  int get() const noexcept { return fd_; }
  void reset() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

inline void make_pipe(Fd& read_end, Fd& write_end) {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) throw SpawnError("pipe failed", errno);
  read_end = Fd(fds[0]);
  write_end = Fd(fds[1]);
}

}  // namespace detail

// Runs argv[0] (searched on PATH) with the given arguments, feeding `input`
// to stdin and capturing stdout/stderr. `env_overrides` are added to the
// inherited environment.
inline ProcessResult run_process(const std::vector<std::string>& argv,
                                 std::string_view input = {},
                                 const std::map<std::string, std::string>& env_overrides = {}) {
  if (argv.empty()) throw InvalidArgumentError("run_process: empty argv");
  // A child that exits before consuming stdin must not kill us.
  static const bool sigpipe_ignored = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)sigpipe_ignored;

  detail::Fd in_r, in_w, out_r, out_w, err_r, err_w;
  detail::make_pipe(in_r, in_w);
  detail::make_pipe(out_r, out_w);
  detail::make_pipe(err_r, err_w);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_r.get(), STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_w.get(), STDOUT_FILENO);
  posix_spawn_file_actions_adddup2(&actions, err_w.get(), STDERR_FILENO);

  std::vector<char*> cargv;
  cargv.reserve(argv.size() + 1);
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  std::vector<std::string> env_storage;
  for (char** e = environ; e && *e; ++e) {
    std::string_view kv(*e);
    auto eq = kv.find('=');
    std::string key(kv.substr(0, eq));
    if (env_overrides.count(key)) continue;
    env_storage.emplace_back(kv);
  }
  for (const auto& [k, v] : env_overrides) env_storage.push_back(k + "=" + v);
  std::vector<char*> cenv;
  for (auto& s : env_storage) cenv.push_back(s.data());
  cenv.push_back(nullptr);

  pid_t pid = 0;
  int rc = posix_spawnp(&pid, cargv[0], &actions, nullptr, cargv.data(), cenv.data());
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) {
    throw SpawnError("cannot execute '" + argv[0] + "': " + std::strerror(rc), rc);
  }
  in_r.reset();
  out_w.reset();
  err_w.reset();

  ProcessResult result;
  std::size_t written = 0;
  if (input.empty()) {
    in_w.reset();
  } else {
    ::fcntl(in_w.get(), F_SETFL, ::fcntl(in_w.get(), F_GETFL) | O_NONBLOCK);
  }

  char buf[65536];
  while (out_r.get() >= 0 || err_r.get() >= 0) {
    pollfd fds[3];
    nfds_t n = 0;
    int idx_out = -1, idx_err = -1, idx_in = -1;
    if (out_r.get() >= 0) {
      idx_out = static_cast<int>(n);
      fds[n++] = {out_r.get(), POLLIN, 0};
    }
    if (err_r.get() >= 0) {
      idx_err = static_cast<int>(n);
      fds[n++] = {err_r.get(), POLLIN, 0};
    }
    if (in_w.get() >= 0) {
      idx_in = static_cast<int>(n);
      fds[n++] = {in_w.get(), POLLOUT, 0};
    }
    if (::poll(fds, n, -1) < 0) {
      if (errno == EINTR) continue;
      throw SpawnError("poll failed", errno);
    }
    auto drain = [&](int idx, detail::Fd& fd, std::string& sink) {
      if (idx < 0 || !(fds[idx].revents & (POLLIN | POLLHUP | POLLERR))) return;
      ssize_t got = ::read(fd.get(), buf, sizeof(buf));
      if (got > 0) {
        sink.append(buf, static_cast<std::size_t>(got));
      } else if (got == 0 || errno != EINTR) {
        fd.reset();
      }
    };
    drain(idx_out, out_r, result.out);
    drain(idx_err, err_r, result.err);
    if (idx_in >= 0 && (fds[idx_in].revents & (POLLOUT | POLLERR | POLLHUP))) {
      if (fds[idx_in].revents & (POLLERR | POLLHUP)) {
        in_w.reset();
      } else {
        std::size_t chunk = std::min<std::size_t>(input.size() - written, 65536);
        ssize_t put = ::write(in_w.get(), input.data() + written, chunk);
        if (put > 0) written += static_cast<std::size_t>(put);
        if (put < 0 && errno != EINTR && errno != EAGAIN) in_w.reset();
        if (written >= input.size()) in_w.reset();
      }
    }
  }
  in_w.reset();

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw SpawnError("waitpid failed", errno);
  }
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  return result;
}

}  // namespace msrlab
