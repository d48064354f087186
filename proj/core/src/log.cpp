#include "recap/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace recap {

spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto existing = spdlog::get("recap");
    if (existing) return existing;
    auto l = spdlog::stderr_logger_mt("recap");
    l->set_pattern("[%Y-%m-%d %H:%M:%S.%e] [%n] [%l] %v");
    return l;
  }();
  return *instance;
}

}  // namespace recap
