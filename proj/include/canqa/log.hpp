#pragma once

#include <cstdio>
#include <functional>
#include <mutex>
#include <string>
#include <utility>

namespace canqa::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

using Sink = std::function<void(Level, const std::string&)>;

namespace detail {

struct State {
  std::mutex mu;
  Level threshold = Level::Info;
  Sink sink;
};

inline State& state() {
  static State s;
  return s;
}

inline const char* tag(Level level) {
  switch (level) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warn: return "warn";
    case Level::Error: return "error";
    case Level::Off: break;
  }
  return "";
}

}  // namespace detail

inline void set_level(Level level) {
  std::lock_guard lock(detail::state().mu);
  detail::state().threshold = level;
}

// Replaces the stderr writer. Pass an empty Sink to restore the default.
inline void set_sink(Sink sink) {
  std::lock_guard lock(detail::state().mu);
  detail::state().sink = std::move(sink);
}

inline void write(Level level, const std::string& msg) {
  auto& s = detail::state();
  std::lock_guard lock(s.mu);
  if (level < s.threshold) return;
  if (s.sink) {
    s.sink(level, msg);
    return;
  }
  std::fprintf(stderr, "[%s] %s\n", detail::tag(level), msg.c_str());
}

inline void debug(const std::string& msg) { write(Level::Debug, msg); }
inline void info(const std::string& msg) { write(Level::Info, msg); }
inline void warn(const std::string& msg) { write(Level::Warn, msg); }
inline void error(const std::string& msg) { write(Level::Error, msg); }

}  // namespace canqa::log
