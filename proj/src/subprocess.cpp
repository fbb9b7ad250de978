#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include "einfuzz/backend.hpp"
#include "einfuzz/errors.hpp"
#include "einfuzz/json_io.hpp"

namespace einfuzz {

namespace {

constexpr std::size_t kMaxResponseBytes = 64u << 20;

struct Fd {
  int fd = -1;
  Fd() = default;
  explicit Fd(int f) : fd(f) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& other) noexcept : fd(other.fd) { other.fd = -1; }
  ~Fd() { reset(); }
  void reset() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

using Clock = std::chrono::steady_clock;

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
      deadline - Clock::now());
  return left.count() > 0 ? static_cast<int>(left.count()) : 0;
}

void kill_and_reap(pid_t pid) {
  ::kill(-pid, SIGKILL);  // the adapter may have spawned its own children
  ::kill(pid, SIGKILL);
  int status = 0;
  ::waitpid(pid, &status, 0);
}

}  // namespace

SubprocessBackend::SubprocessBackend(std::string command)
    : command_(std::move(command)) {
  if (command_.empty()) throw BackendConfigError("empty adapter command");
  // Writes to an adapter that already exited must fail with EPIPE instead of
  // taking the harness down.
  ::signal(SIGPIPE, SIG_IGN);
}

ExecutionOutcome SubprocessBackend::execute(const ExecutionRequest& req) const {
  // Decode up front: the output shape (dims along the output indices) is the
  // only way to interpret the adapter's coordinate list.
  KernelBundle bundle;
  try {
    bundle = kernel_from_json(req.document);
  } catch (const std::exception& e) {
    return ExecutionOutcome::rejected(std::string("bad document: ") + e.what());
  }
  std::vector<std::int64_t> out_shape;
  for (IndexVar v : bundle.kernel.output.indices) {
    auto it = bundle.kernel.dims.find(v);
    if (it == bundle.kernel.dims.end()) {
      return ExecutionOutcome::rejected(std::string("dims missing output index '") +
                                        v.label() + "'");
    }
    out_shape.push_back(it->second);
  }

  const std::string request = req.document.dump();

  int stdin_pipe[2], stdout_pipe[2], exec_pipe[2];
  if (::pipe(stdin_pipe) != 0) {
    throw BackendConfigError(std::string("pipe: ") + std::strerror(errno));
  }
  Fd child_stdin(stdin_pipe[0]);
  Fd to_child(stdin_pipe[1]);
  if (::pipe(stdout_pipe) != 0) {
    throw BackendConfigError(std::string("pipe: ") + std::strerror(errno));
  }
  Fd from_child(stdout_pipe[0]);
  Fd child_stdout(stdout_pipe[1]);
  if (::pipe2(exec_pipe, O_CLOEXEC) != 0) {
    throw BackendConfigError(std::string("pipe: ") + std::strerror(errno));
  }
  Fd exec_status(exec_pipe[0]);
  Fd exec_writer(exec_pipe[1]);

  const pid_t pid = ::fork();
  if (pid < 0) {
    throw BackendConfigError(std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(child_stdin.fd, STDIN_FILENO);
    ::dup2(child_stdout.fd, STDOUT_FILENO);
    ::close(child_stdin.fd);
    ::close(child_stdout.fd);
    ::close(to_child.fd);
    ::close(from_child.fd);
    ::close(exec_status.fd);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    const int code = errno;  // exec failed: report through the CLOEXEC pipe
    [[maybe_unused]] ssize_t n = ::write(exec_writer.fd, &code, sizeof code);
    ::_exit(127);
  }

  ::setpgid(pid, pid);  // mirror the child's call; one of the two wins the race
  child_stdin.reset();
  child_stdout.reset();
  exec_writer.reset();

  // Request documents are small (desk-scale tensors), far below pipe
  // capacity, so a plain blocking write cannot stall.
  std::size_t written = 0;
  while (written < request.size()) {
    const ssize_t n =
        ::write(to_child.fd, request.data() + written, request.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      break;  // EPIPE: the child is gone; its exit status tells the story
    }
    written += static_cast<std::size_t>(n);
  }
  to_child.reset();

  int exec_errno = 0;
  const ssize_t exec_read = ::read(exec_status.fd, &exec_errno, sizeof exec_errno);
  exec_status.reset();
  if (exec_read == static_cast<ssize_t>(sizeof exec_errno)) {
    int status = 0;
    ::waitpid(pid, &status, 0);
    throw BackendConfigError("cannot spawn adapter '" + command_ +
                             "': " + std::strerror(exec_errno));
  }

  const auto deadline = Clock::now() + std::chrono::milliseconds(req.timeout_ms);
  std::string response;
  for (;;) {
    struct pollfd pfd {
      from_child.fd, POLLIN, 0
    };
    const int ready = ::poll(&pfd, 1, remaining_ms(deadline));
    if (ready < 0) {
      if (errno == EINTR) continue;
      kill_and_reap(pid);
      throw BackendConfigError(std::string("poll: ") + std::strerror(errno));
    }
    if (ready == 0) {
      kill_and_reap(pid);
      return ExecutionOutcome::timed_out();
    }
    char buf[4096];
    const ssize_t n = ::read(from_child.fd, buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR) continue;
      kill_and_reap(pid);
      throw BackendConfigError(std::string("read: ") + std::strerror(errno));
    }
    if (n == 0) break;  // adapter closed stdout
    response.append(buf, static_cast<std::size_t>(n));
    if (response.size() > kMaxResponseBytes) {
      kill_and_reap(pid);
      return ExecutionOutcome::crashed("adapter response too large");
    }
  }

  // Output done; the adapter still has to exit before the deadline.
  int status = 0;
  for (;;) {
    const pid_t reaped = ::waitpid(pid, &status, WNOHANG);
    if (reaped == pid) break;
    if (reaped < 0 && errno != EINTR) {
      kill_and_reap(pid);
      throw BackendConfigError(std::string("waitpid: ") + std::strerror(errno));
    }
    if (Clock::now() >= deadline) {
      kill_and_reap(pid);
      return ExecutionOutcome::timed_out();
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }

  if (WIFSIGNALED(status)) {
    return ExecutionOutcome::crashed("adapter killed by signal " +
                                     std::to_string(WTERMSIG(status)));
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const int code = WEXITSTATUS(status);
    // The shell reserves 126/127 for "cannot execute"/"not found": the
    // adapter never ran, which is a harness misconfiguration, not a crash.
    if (code == 126 || code == 127) {
      throw BackendConfigError("cannot spawn adapter '" + command_ +
                               "' (shell exit " + std::to_string(code) + ")");
    }
    return ExecutionOutcome::crashed("adapter exited with status " +
                                     std::to_string(code));
  }

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(response);
  } catch (const std::exception& e) {
    return ExecutionOutcome::crashed(std::string("malformed adapter response: ") +
                                     e.what());
  }
  if (!doc.is_object() || !doc.contains("status") || !doc["status"].is_string()) {
    return ExecutionOutcome::crashed("malformed adapter response: missing status");
  }
  const std::string status_text = doc["status"].get<std::string>();
  if (status_text == "rejected") {
    std::string message;
    if (doc.contains("message") && doc["message"].is_string()) {
      message = doc["message"].get<std::string>();
    }
    return ExecutionOutcome::rejected(std::move(message));
  }
  if (status_text != "ok") {
    return ExecutionOutcome::crashed("malformed adapter response: status '" +
                                     status_text + "'");
  }
  if (!doc.contains("output")) {
    return ExecutionOutcome::crashed("malformed adapter response: missing output");
  }
  try {
    return ExecutionOutcome::success(tensor_from_json(
        doc["output"], out_shape, bundle.kernel.dtype, "output"));
  } catch (const std::exception& e) {
    return ExecutionOutcome::crashed(std::string("malformed adapter response: ") +
                                     e.what());
  }
}

}  // namespace einfuzz
