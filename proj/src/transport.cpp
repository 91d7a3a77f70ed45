#include "waterjudge/transport.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include <httplib.h>

#include "waterjudge/errors.hpp"

namespace waterjudge {

HttpTransport::HttpTransport(std::string host, int port, std::chrono::milliseconds timeout, std::size_t max_in_flight)
    : host_(std::move(host)), port_(port), timeout_(timeout), max_in_flight_(std::max<std::size_t>(1, max_in_flight)) {}

std::string HttpTransport::exchange(std::string_view route, const std::string& body, std::string_view request_id) {
  httplib::Client client(host_, port_);
  const auto secs = static_cast<time_t>(timeout_.count() / 1000);
  const auto usecs = static_cast<time_t>((timeout_.count() % 1000) * 1000);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  auto res = client.Post(std::string(route), body, "application/json");
  if (!res) {
    throw TransportError("HTTP " + std::string(route) + " to " + host_ + ":" + std::to_string(port_) +
                             " failed: " + httplib::to_string(res.error()),
                         std::string(request_id));
  }
  if (res->status != 200) {
    throw TransportError("HTTP status " + std::to_string(res->status) + " from " + std::string(route),
                         std::string(request_id));
  }
  return res->body;
}

StreamTransport::StreamTransport(int read_fd, int write_fd, std::chrono::milliseconds timeout, bool owns_fds,
                                 int child_pid)
    : read_fd_(read_fd), write_fd_(write_fd), timeout_(timeout), owns_fds_(owns_fds), child_pid_(child_pid) {}

StreamTransport::~StreamTransport() {
  if (owns_fds_) {
    ::close(write_fd_);
    if (read_fd_ != write_fd_) ::close(read_fd_);
  }
  if (child_pid_ > 0) {
    int status = 0;
    if (::waitpid(child_pid_, &status, WNOHANG) == 0) {
      ::kill(child_pid_, SIGTERM);
      ::waitpid(child_pid_, &status, 0);
    }
  }
}

std::unique_ptr<StreamTransport> StreamTransport::spawn(const std::string& command,
                                                        std::chrono::milliseconds timeout) {
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) throw TransportError(std::string("pipe: ") + std::strerror(errno));
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw TransportError(std::string("pipe: ") + std::strerror(errno));
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw TransportError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  ::signal(SIGPIPE, SIG_IGN);
  return std::make_unique<StreamTransport>(from_child[0], to_child[1], timeout, true, pid);
}

void StreamTransport::write_all(const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("stream write failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> StreamTransport::read_line(std::chrono::milliseconds wait) {
  const auto deadline = std::chrono::steady_clock::now() + wait;
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd pfd{read_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("stream poll failed: ") + std::strerror(errno));
    }
    if (rc == 0) return std::nullopt;
    char chunk[4096];
    const ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("stream read failed: ") + std::strerror(errno));
    }
    if (n == 0) throw TransportError("stream closed by peer");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::optional<wire::Hello> StreamTransport::read_hello(std::chrono::milliseconds wait) {
  std::lock_guard lock(mu_);
  auto line = read_line(wait);
  if (!line) return std::nullopt;
  if (wire::message_type(*line) != "hello") {
    buffer_.insert(0, *line + "\n");
    return std::nullopt;
  }
  return wire::decode_hello(*line);
}

std::string StreamTransport::exchange(std::string_view, const std::string& body, std::string_view request_id) {
  std::lock_guard lock(mu_);
  write_all(body + "\n");
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    auto line = left.count() > 0 ? read_line(left) : std::nullopt;
    if (!line) {
      abandoned_.insert(std::string(request_id));
      throw TransportError("stream response timed out", std::string(request_id));
    }
    if (line->empty() || wire::message_type(*line) == "hello") continue;
    const auto id = wire::message_id(*line);
    if (id != request_id && abandoned_.count(id)) {
      abandoned_.erase(id);
      continue;
    }
    return *line;
  }
}

}  // namespace waterjudge
