#pragma once

#include <functional>
#include <string_view>

namespace groundal {

enum class LogLevel { Debug, Info, Warning, Silent };

// Process-wide log threshold; messages below it are dropped.
void set_log_level(LogLevel level);
LogLevel log_level();

// Replaces the stderr sink. Passing an empty function restores stderr.
using LogSink = std::function<void(LogLevel, std::string_view)>;
void set_log_sink(LogSink sink);

void log_message(LogLevel level, std::string_view message);

inline void log_info(std::string_view message) { log_message(LogLevel::Info, message); }
inline void log_warning(std::string_view message) { log_message(LogLevel::Warning, message); }

}  // namespace groundal
