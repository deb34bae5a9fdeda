#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string_view>

namespace dyson::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

inline std::atomic<Level>& threshold() {
    static std::atomic<Level> level{Level::warn};
    return level;
}

inline void set_level(Level level) { threshold() = level; }

template <class... Args>
void write(Level level, std::string_view tag, const Args&... args) {
    if (level < threshold().load()) return;
    std::ostringstream os;
    os << '[' << tag << "] ";
    (os << ... << args);
    os << '\n';
    static std::mutex mutex;
    std::lock_guard lock(mutex);
    std::clog << os.str();
}

template <class... Args> void debug(const Args&... a) { write(Level::debug, "debug", a...); }
template <class... Args> void info(const Args&... a) { write(Level::info, "info", a...); }
template <class... Args> void warn(const Args&... a) { write(Level::warn, "warn", a...); }

}  // namespace dyson::log
