#include "moco5d/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

namespace moco5d {

namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::warn)};
}

LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }
void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }

void log_message(LogLevel level, std::string const &msg)
{
  static std::mutex m;
  std::lock_guard lk(m);
  char const *tag = level == LogLevel::warn ? "warning" : (level == LogLevel::info ? "info" : "debug");
  fmt::print(stderr, "[{}] {}\n", tag, msg);
  std::fflush(stderr);
}

} // namespace moco5d
