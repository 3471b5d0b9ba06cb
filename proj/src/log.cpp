#include "m2p/log.hpp"

#include <iostream>
#include <mutex>

namespace m2p::log {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

Sink& current() {
  static Sink sink = [](std::string_view level, std::string_view message) {
    std::clog << "[m2p] " << level << ": " << message << '\n';
  };
  return sink;
}

void emit(std::string_view level, std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (current()) current()(level, message);
}

}  // namespace

Sink set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  Sink previous = std::move(current());
  current() = std::move(sink);
  return previous;
}

void info(std::string_view message) { emit("info", message); }
void warn(std::string_view message) { emit("warning", message); }

}  // namespace m2p::log
