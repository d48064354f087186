#pragma once

#include <memory>

#include <spdlog/logger.h>

namespace recap {

// Library logger; always writes to stderr so stdout stays clean for CLI
// artifacts.
spdlog::logger& logger();

}  // namespace recap
