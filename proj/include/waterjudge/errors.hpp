#pragma once

#include <stdexcept>
#include <string>

namespace waterjudge {

// Invalid input to a pure operation (out-of-range ids, empty sequences, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Request exceeds a supported size limit.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Config file or override is malformed.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Backend unreachable, timed out, or returned an error response.
class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& what, std::string request_id = {});
  const std::string& request_id() const noexcept { return request_id_; }

 private:
  std::string request_id_;
};

// Backend answered, but the answer violates the wire protocol.
class ProtocolError : public TransportError {
 public:
  using TransportError::TransportError;
};

}  // namespace waterjudge
