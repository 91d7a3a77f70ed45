#pragma once
// Byte transports for the wire protocol: HTTP POST and newline-delimited streams.

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "waterjudge/wire.hpp"

namespace waterjudge {

class Transport {
 public:
  virtual ~Transport() = default;
  // Sends one request body and returns the matching response line.
  // route is "/judge" or "/generate"; stream transports ignore it.
  virtual std::string exchange(std::string_view route, const std::string& body, std::string_view request_id) = 0;
  // Concurrent exchanges this transport can carry.
  virtual std::size_t max_in_flight() const = 0;
};

class HttpTransport final : public Transport {
 public:
  HttpTransport(std::string host, int port, std::chrono::milliseconds timeout, std::size_t max_in_flight = 1);

  std::string exchange(std::string_view route, const std::string& body, std::string_view request_id) override;
  std::size_t max_in_flight() const override { return max_in_flight_; }

 private:
  std::string host_;
  int port_;
  std::chrono::milliseconds timeout_;
  std::size_t max_in_flight_;
};

// Line-oriented transport over a pair of file descriptors (pipes to a child
// process, or a socket). One exchange at a time. Responses to requests that
// previously timed out are recognised by id and skipped.
class StreamTransport final : public Transport {
 public:
  StreamTransport(int read_fd, int write_fd, std::chrono::milliseconds timeout, bool owns_fds = true,
                  int child_pid = -1);
  ~StreamTransport() override;
  StreamTransport(const StreamTransport&) = delete;
  StreamTransport& operator=(const StreamTransport&) = delete;

  // Launches `/bin/sh -c command` with stdin/stdout connected to this transport.
  static std::unique_ptr<StreamTransport> spawn(const std::string& command, std::chrono::milliseconds timeout);

  std::string exchange(std::string_view route, const std::string& body, std::string_view request_id) override;
  std::size_t max_in_flight() const override { return 1; }

  // Reads the bridge's hello line if one arrives within `wait`.
  std::optional<wire::Hello> read_hello(std::chrono::milliseconds wait);

 private:
  std::optional<std::string> read_line(std::chrono::milliseconds wait);
  void write_all(const std::string& data);

  int read_fd_;
  int write_fd_;
  std::chrono::milliseconds timeout_;
  bool owns_fds_;
  int child_pid_;
  std::string buffer_;
  std::set<std::string> abandoned_;
  std::mutex mu_;
};

}  // namespace waterjudge
