#include "gridcascade/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <string>

namespace gridcascade {

namespace {
LogLevel g_level = LogLevel::quiet;
}

LogLevel log_level() { return g_level; }

void set_log_level(LogLevel level) { g_level = level; }

LogLevel log_level_from_env(LogLevel fallback) {
  const char* raw = std::getenv("GRIDCASCADE_LOG");
  if (raw == nullptr) return fallback;
  const std::string v(raw);
  if (v == "quiet") return LogLevel::quiet;
  if (v == "info") return LogLevel::info;
  if (v == "trace") return LogLevel::trace;
  return fallback;
}

namespace detail {
void log_line(LogLevel, std::string_view msg) {
  std::fwrite(msg.data(), 1, msg.size(), stderr);
  std::fputc('\n', stderr);
}
}  // namespace detail

}  // namespace gridcascade
