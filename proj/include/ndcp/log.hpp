#pragma once

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace ndcp::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline Level& threshold() {
  static Level level = [] {
    const char* env = std::getenv("NDCP_LOG");
    if (env == nullptr) return Level::Warn;
    if (std::strcmp(env, "error") == 0) return Level::Error;
    if (std::strcmp(env, "warn") == 0) return Level::Warn;
    if (std::strcmp(env, "info") == 0) return Level::Info;
    if (std::strcmp(env, "debug") == 0) return Level::Debug;
    return Level::Warn;
  }();
  return level;
}

inline void write(Level level, const char* tag, const char* fmt, ...) {
  if (level > threshold()) return;
  std::fprintf(stderr, "[%s] ", tag);
  va_list args;
  va_start(args, fmt);
  std::vfprintf(stderr, fmt, args);
  va_end(args);
  std::fputc('\n', stderr);
}

#define NDCP_LOG_ERROR(...) ::ndcp::log::write(::ndcp::log::Level::Error, "error", __VA_ARGS__)
#define NDCP_LOG_WARN(...) ::ndcp::log::write(::ndcp::log::Level::Warn, "warn", __VA_ARGS__)
#define NDCP_LOG_INFO(...) ::ndcp::log::write(::ndcp::log::Level::Info, "info", __VA_ARGS__)
#define NDCP_LOG_DEBUG(...) ::ndcp::log::write(::ndcp::log::Level::Debug, "debug", __VA_ARGS__)

}  // namespace ndcp::log
