#include "waterjudge/errors.hpp"

#include <utility>

namespace waterjudge {

TransportError::TransportError(const std::string& what, std::string request_id)
    : std::runtime_error(request_id.empty() ? what : what + " [request " + request_id + "]"),
      request_id_(std::move(request_id)) {}

}  // namespace waterjudge
