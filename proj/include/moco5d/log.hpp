#pragma once

#include <fmt/format.h>
#include <string>

namespace moco5d {

enum class LogLevel
{
  quiet = 0,
  warn = 1,
  info = 2,
  debug = 3
};

LogLevel log_level();
void set_log_level(LogLevel level);
void log_message(LogLevel level, std::string const &msg);

template <typename... Args>
void log_warn(fmt::format_string<Args...> f, Args &&...args)
{
  if (log_level() >= LogLevel::warn) { log_message(LogLevel::warn, fmt::format(f, std::forward<Args>(args)...)); }
}

template <typename... Args>
void log_info(fmt::format_string<Args...> f, Args &&...args)
{
  if (log_level() >= LogLevel::info) { log_message(LogLevel::info, fmt::format(f, std::forward<Args>(args)...)); }
}

template <typename... Args>
void log_debug(fmt::format_string<Args...> f, Args &&...args)
{
  if (log_level() >= LogLevel::debug) { log_message(LogLevel::debug, fmt::format(f, std::forward<Args>(args)...)); }
}

} // namespace moco5d
