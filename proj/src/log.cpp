#include "kbse/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace kbse {

namespace {

LogLevel parse_env_level() {
    const char* v = std::getenv("KBSE_LOG_LEVEL");
    if (!v) return LogLevel::Warn;
    std::string s(v);
    if (s == "error") return LogLevel::Error;
    if (s == "warn") return LogLevel::Warn;
    if (s == "info") return LogLevel::Info;
    if (s == "debug") return LogLevel::Debug;
    return LogLevel::Warn;
}

LogLevel& level_ref() {
    static LogLevel level = parse_env_level();
    return level;
}

std::mutex& log_mutex() {
    static std::mutex m;
    return m;
}

void emit(LogLevel lvl, const char* tag, const std::string& msg) {
    if (static_cast<int>(lvl) > static_cast<int>(level_ref())) return;
    std::lock_guard<std::mutex> lock(log_mutex());
    std::cerr << "[kbse:" << tag << "] " << msg << "\n";
}

}  // namespace

LogLevel log_level() { return level_ref(); }
void set_log_level(LogLevel level) { level_ref() = level; }

void log_error(const std::string& msg) { emit(LogLevel::Error, "error", msg); }
void log_warn(const std::string& msg) { emit(LogLevel::Warn, "warn", msg); }
void log_info(const std::string& msg) { emit(LogLevel::Info, "info", msg); }
void log_debug(const std::string& msg) { emit(LogLevel::Debug, "debug", msg); }

}  // namespace kbse
