#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string_view>

namespace hnm::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

// Structured logging: one JSON object per line, written to stderr and,
// when attached, to a run log file.
void set_level(Level level);
Level level();
void attach_file(const std::filesystem::path& path);
void detach_file();

void event(Level level, std::string_view name, nlohmann::json fields = nlohmann::json::object());

inline void debug(std::string_view name, nlohmann::json f = nlohmann::json::object()) {
  event(Level::debug, name, std::move(f));
}
inline void info(std::string_view name, nlohmann::json f = nlohmann::json::object()) {
  event(Level::info, name, std::move(f));
}
inline void warn(std::string_view name, nlohmann::json f = nlohmann::json::object()) {
  event(Level::warn, name, std::move(f));
}
inline void error(std::string_view name, nlohmann::json f = nlohmann::json::object()) {
  event(Level::error, name, std::move(f));
}

Level parse_level(std::string_view s);

}  // namespace hnm::log
