#pragma once

#include <fmt/core.h>

#include <string_view>

namespace gridcascade {

enum class LogLevel { quiet = 0, info = 1, trace = 2 };

LogLevel log_level();
void set_log_level(LogLevel level);

/// Reads GRIDCASCADE_LOG (quiet|info|trace); returns `fallback` when unset
/// or unrecognized.
LogLevel log_level_from_env(LogLevel fallback);

namespace detail {
void log_line(LogLevel level, std::string_view msg);
}

template <typename... Args>
void log_info(fmt::format_string<Args...> f, Args&&... args) {
  if (log_level() >= LogLevel::info)
    detail::log_line(LogLevel::info, fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
void log_trace(fmt::format_string<Args...> f, Args&&... args) {
  if (log_level() >= LogLevel::trace)
    detail::log_line(LogLevel::trace, fmt::format(f, std::forward<Args>(args)...));
}

}  // namespace gridcascade
