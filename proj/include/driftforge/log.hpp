#pragma once

#include <iostream>
#include <string>

namespace driftforge {

enum class LogLevel { quiet = 0, warn = 1, info = 2, debug = 3 };

inline LogLevel& log_level() {
    static LogLevel level = LogLevel::warn;
    return level;
}

inline void log_msg(LogLevel at, const std::string& msg) {
    if (static_cast<int>(at) <= static_cast<int>(log_level()))
        std::cerr << "[drift-forge] " << msg << "\n";
}

inline void log_warn(const std::string& msg) { log_msg(LogLevel::warn, msg); }
inline void log_info(const std::string& msg) { log_msg(LogLevel::info, msg); }

}  // namespace driftforge
