#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "argd/error.hpp"

namespace argd {

/// Flat INI-style experiment config: `[section]` headers, `key = value`
/// lines, `#`/`;` comments. Keys are addressed as "section.key". Every
/// lookup takes an explicit default so config files stay diffable and
/// minimal.
class Config {
public:
  Config() = default;

  static Config parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
      throw Error(ErrorCode::io, "cannot open config " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_string(buffer.str(), path.string());
  }

  static Config parse_string(const std::string& text, const std::string& origin = "<string>") {
    Config config;
    std::string section;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string trimmed = trim(line);
      if (trimmed.empty() || trimmed[0] == '#' || trimmed[0] == ';') continue;
      if (trimmed.front() == '[') {
        if (trimmed.back() != ']' || trimmed.size() < 3) {
          throw Error(ErrorCode::invalid_argument,
                      origin + ":" + std::to_string(lineno) + ": malformed section header");
        }
        section = trim(trimmed.substr(1, trimmed.size() - 2));
        continue;
      }
      const std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorCode::invalid_argument,
                    origin + ":" + std::to_string(lineno) + ": expected key = value");
      }
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) {
        throw Error(ErrorCode::invalid_argument,
                    origin + ":" + std::to_string(lineno) + ": empty key");
      }
      config.values_[section.empty() ? key : section + "." + key] = value;
    }
    return config;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const double value = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(it->second);
      return value;
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_argument, "config key " + key + ": not a number: " + it->second);
    }
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const long long value = std::stoll(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(it->second);
      return value;
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_argument,
                  "config key " + key + ": not an integer: " + it->second);
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error(ErrorCode::invalid_argument, "config key " + key + ": not a boolean: " + v);
  }

  /// Comma-separated numbers.
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string token;
    while (std::getline(ss, token, ',')) {
      const std::string t = trim(token);
      if (t.empty()) continue;
      try {
        out.push_back(std::stod(t));
      } catch (const std::exception&) {
        throw Error(ErrorCode::invalid_argument,
                    "config key " + key + ": not a number list: " + it->second);
      }
    }
    if (out.empty()) {
      throw Error(ErrorCode::invalid_argument, "config key " + key + ": empty list");
    }
    return out;
  }

  std::vector<std::size_t> get_size_list(const std::string& key,
                                         const std::vector<std::size_t>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<std::size_t> out;
    for (double v : get_double_list(key, {})) {
      if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
        throw Error(ErrorCode::invalid_argument, "config key " + key + ": expected counts");
      }
      out.push_back(static_cast<std::size_t>(v));
    }
    return out;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  /// FNV-1a over the sorted, resolved key=value pairs; stamped onto every
  /// output so artifacts can be traced back to the exact effective config.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const std::string& s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
    };
    for (const auto& [key, value] : values_) {
      feed(key);
      feed("=");
      feed(value);
      feed("\n");
    }
    return h;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  /// ARGD_SEED env var overrides the config seed for quick sweeps.
  void apply_env_seed_override(const std::string& seed_key) {
    if (const char* env = std::getenv("ARGD_SEED")) {
      set(seed_key, env);
    }
  }

private:
  static std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace argd
