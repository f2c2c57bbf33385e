#include "groundal/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace groundal {
namespace {

std::atomic<LogLevel> g_level{LogLevel::Warning};
std::mutex g_mutex;
LogSink g_sink;

std::string_view level_tag(LogLevel level) {
  switch (level) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info: return "info";
    case LogLevel::Warning: return "warning";
    case LogLevel::Silent: break;
  }
  return "";
}

}  // namespace

void set_log_level(LogLevel level) { g_level.store(level); }
LogLevel log_level() { return g_level.load(); }

void set_log_sink(LogSink sink) {
  std::lock_guard lock(g_mutex);
  g_sink = std::move(sink);
}

void log_message(LogLevel level, std::string_view message) {
  if (level == LogLevel::Silent || level < g_level.load()) return;
  std::lock_guard lock(g_mutex);
  if (g_sink) {
    g_sink(level, message);
    return;
  }
  std::cerr << "[groundal " << level_tag(level) << "] " << message << '\n';
}

}  // namespace groundal
