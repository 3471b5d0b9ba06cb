#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace m2p::log {

using Sink = std::function<void(std::string_view level, std::string_view message)>;

// Replaces the sink (default: "[m2p] <level>: <message>" on stderr) and
// returns the previous one. An empty sink discards messages.
Sink set_sink(Sink sink);

void info(std::string_view message);
void warn(std::string_view message);

}  // namespace m2p::log
