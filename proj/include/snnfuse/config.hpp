// Copyright 2026 The snnfuse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

// Flat key=value text. '#' starts a comment, blank lines are ignored,
// whitespace around keys and values is trimmed, and a key may appear once.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace snnfuse {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, const std::string& msg)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}
  /// 1-based; 0 when the problem is not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct ConfigEntry {
  std::string value;
  std::size_t line = 0;
};

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& is) {
    KeyValueConfig cfg;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(is, raw)) {
      ++line_no;
      std::string_view line = raw;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError(line_no, "expected key=value");
      const auto key = trim(line.substr(0, eq));
      const auto value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError(line_no, "empty key");
      if (value.empty()) throw ConfigError(line_no, "empty value for '" + std::string(key) + "'");
      auto [it, fresh] = cfg.entries_.emplace(std::string(key), ConfigEntry{std::string(value), line_no});
      if (!fresh) {
        throw ConfigError(line_no, "duplicate key '" + std::string(key) + "' (first on line " +
                                       std::to_string(it->second.line) + ")");
      }
    }
    return cfg;
  }

  static KeyValueConfig parse(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

  const std::map<std::string, ConfigEntry>& entries() const noexcept { return entries_; }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    return convert<T>(it->second);
  }

 private:
  static std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto lo = s.find_first_not_of(ws);
    if (lo == std::string_view::npos) return {};
    return s.substr(lo, s.find_last_not_of(ws) - lo + 1);
  }

  template <typename T>
  static T convert(const ConfigEntry& e) {
    if constexpr (std::is_same_v<T, std::string>) {
      return e.value;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (e.value == "true" || e.value == "1") return true;
      if (e.value == "false" || e.value == "0") return false;
      throw ConfigError(e.line, "expected true/false, got '" + e.value + "'");
    } else {
      T out{};
      const char* first = e.value.data();
      const char* last = first + e.value.size();
      const auto [ptr, ec] = std::from_chars(first, last, out);
      if (ec != std::errc{} || ptr != last) {
        throw ConfigError(e.line, "cannot parse '" + e.value + "' as a number");
      }
      return out;
    }
  }

  std::map<std::string, ConfigEntry> entries_;
};

}  // namespace snnfuse
