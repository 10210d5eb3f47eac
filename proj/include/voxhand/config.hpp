#pragma once

#include <charconv>
#include <map>
#include <sstream>
#include <string>

#include "voxhand/common.hpp"

namespace voxhand {

// Plain `key = value` configuration with `#` comments. Values are stored as
// text; typed getters validate on access.
struct RunConfig {
  std::map<std::string, std::string> values;

  static RunConfig parse(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const auto strip = [](const std::string& s) {
        const std::size_t a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        const std::size_t b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
      };
      if (strip(line).empty()) continue;
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
      const std::string key = strip(line.substr(0, eq));
      const std::string value = strip(line.substr(eq + 1));
      if (key.empty())
        throw ParseError("config line " + std::to_string(line_no) + ": empty key");
      if (cfg.values.count(key))
        throw ParseError("config line " + std::to_string(line_no) + ": duplicate key " + key);
      cfg.values[key] = value;
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values.count(key) != 0; }

  void set(const std::string& key, const std::string& value) { values[key] = value; }

  std::string get_string(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end()) throw InvalidSpec("config: missing required key " + key);
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }

  double get_real(const std::string& key, double fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    double v = 0.0;
    const std::string& s = it->second;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw InvalidSpec("config: key " + key + " has non-numeric value '" + s + "'");
    return v;
  }

  long get_int(const std::string& key, long fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    long v = 0;
    const std::string& s = it->second;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw InvalidSpec("config: key " + key + " has non-integer value '" + s + "'");
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw InvalidSpec("config: key " + key + " has non-boolean value '" + it->second + "'");
  }
};

}  // namespace voxhand
