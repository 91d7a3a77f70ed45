#pragma once

#include <spdlog/logger.h>

#include <memory>

namespace waterjudge {

// Shared stderr logger. Level comes from WATERJUDGE_LOG (trace|debug|info|warn|error|off), default warn.
std::shared_ptr<spdlog::logger> logger();

}  // namespace waterjudge
