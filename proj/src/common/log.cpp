#include "nadir/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace nadir::log {

namespace {

std::atomic<Level> current_level{Level::Info};
std::mutex output_mutex;

void emit(Level at, const char* tag, const std::string& message) {
    if (at < current_level.load()) return;
    std::lock_guard lock(output_mutex);
    std::cerr << '[' << tag << "] " << message << '\n';
}

}  // namespace

void set_level(Level level) { current_level.store(level); }
Level level() { return current_level.load(); }

void debug(const std::string& message) { emit(Level::Debug, "debug", message); }
void info(const std::string& message) { emit(Level::Info, "info", message); }
void warn(const std::string& message) { emit(Level::Warning, "warn", message); }

}  // namespace nadir::log
