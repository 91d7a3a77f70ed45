#include "waterjudge/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>

namespace waterjudge {

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto lg = spdlog::stderr_color_mt("waterjudge");
    lg->set_pattern("[%l] %v");
    auto level = spdlog::level::warn;
    if (const char* env = std::getenv("WATERJUDGE_LOG")) level = spdlog::level::from_str(env);
    lg->set_level(level);
    return lg;
  }();
  return instance;
}

}  // namespace waterjudge
