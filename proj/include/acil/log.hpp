#ifndef ACIL_LOG_HPP
#define ACIL_LOG_HPP

#include <iostream>
#include <sstream>
#include <string_view>

namespace acil::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

inline Level& threshold() {
  static Level level = Level::Info;
  return level;
}

template <typename... Args>
void write(Level level, std::string_view tag, const Args&... args) {
  if (level < threshold()) return;
  std::ostringstream line;
  line << '[' << tag << "] ";
  (line << ... << args);
  line << '\n';
  std::cerr << line.str();
}

template <typename... Args>
void info(const Args&... args) { write(Level::Info, "info", args...); }
template <typename... Args>
void warn(const Args&... args) { write(Level::Warn, "warn", args...); }
template <typename... Args>
void error(const Args&... args) { write(Level::Error, "error", args...); }

}  // namespace acil::log

#endif  // ACIL_LOG_HPP
