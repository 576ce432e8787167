#pragma once

#include <string>

namespace nadir::log {

enum class Level { Debug = 0, Info = 1, Warning = 2, Silent = 3 };

void set_level(Level level);
Level level();

void debug(const std::string& message);
void info(const std::string& message);
void warn(const std::string& message);

}  // namespace nadir::log
