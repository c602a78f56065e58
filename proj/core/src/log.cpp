#include "hnm/log.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <mutex>
#include <stdexcept>

namespace hnm::log {
namespace {

struct Sink {
  std::mutex mu;
  Level level = Level::warn;
  std::ofstream file;
};

Sink& sink() {
  static Sink s;
  return s;
}

const char* level_name(Level l) {
  switch (l) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
    case Level::off: return "off";
  }
  return "?";
}

}  // namespace

void set_level(Level l) {
  std::lock_guard lock(sink().mu);
  sink().level = l;
}

Level level() {
  std::lock_guard lock(sink().mu);
  return sink().level;
}

void attach_file(const std::filesystem::path& path) {
  std::lock_guard lock(sink().mu);
  sink().file = std::ofstream(path, std::ios::app);
}

void detach_file() {
  std::lock_guard lock(sink().mu);
  sink().file.close();
}

void event(Level l, std::string_view name, nlohmann::json fields) {
  auto& s = sink();
  std::lock_guard lock(s.mu);
  const bool to_stderr = l >= s.level;
  if (!to_stderr && !s.file.is_open()) return;
  const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  nlohmann::json line = {{"ts_ms", now}, {"level", level_name(l)}, {"event", name}};
  if (fields.is_object()) {
    for (auto& [k, v] : fields.items()) line[k] = std::move(v);
  }
  const std::string text = line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  if (to_stderr) std::cerr << text << '\n';
  if (s.file.is_open()) s.file << text << '\n' << std::flush;
}

Level parse_level(std::string_view v) {
  if (v == "debug") return Level::debug;
  if (v == "info") return Level::info;
  if (v == "warn") return Level::warn;
  if (v == "error") return Level::error;
  if (v == "off") return Level::off;
  throw std::invalid_argument("unknown log level: " + std::string(v));
}

}  // namespace hnm::log
