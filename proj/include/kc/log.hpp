#pragma once

// Minimal leveled logging to stderr. Verbosity comes from KC_LOG_LEVEL
// (error, warn, info, debug); the default is info.

#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

namespace kc {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

inline LogLevel log_level_from_env() {
  const char* v = std::getenv("KC_LOG_LEVEL");
  if (!v) return LogLevel::kInfo;
  const std::string_view s(v);
  if (s == "error") return LogLevel::kError;
  if (s == "warn") return LogLevel::kWarn;
  if (s == "debug") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

inline LogLevel& log_threshold() {
  static LogLevel level = log_level_from_env();
  return level;
}

inline void log(LogLevel level, std::string_view msg) {
  if (level > log_threshold()) return;
  static constexpr const char* kNames[] = {"error", "warn", "info", "debug"};
  std::cerr << "[" << kNames[static_cast<int>(level)] << "] " << msg << '\n';
}

inline void log_info(std::string_view msg) { log(LogLevel::kInfo, msg); }
inline void log_warn(std::string_view msg) { log(LogLevel::kWarn, msg); }
inline void log_debug(std::string_view msg) { log(LogLevel::kDebug, msg); }

}  // namespace kc
