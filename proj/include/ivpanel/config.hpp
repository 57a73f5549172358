#pragma once

// Sectioned key = value configuration (a TOML subset) with layered
// precedence: command-line flags over file values over built-in defaults.
//
//   # comment
//   [section]
//   key = 42
//   name = "quoted string"
//   list = [a, "b", 3]

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ivpanel/csv.hpp"
#include "ivpanel/error.hpp"

namespace ivpanel::config {

/// Flattened "section.key" -> raw value text (quotes removed from scalars,
/// lists kept in bracket form).
using Values = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(std::string_view s) { return csv::Table::trim(s); }

inline std::string unquote(const std::string& v, const std::string& where) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'')) {
    if (v.back() != v.front()) throw ConfigError("config", "parse", where + ": unterminated string");
    return v.substr(1, v.size() - 2);
  }
  return v;
}

/// Removes a trailing comment that is not inside quotes.
inline std::string strip_comment(const std::string& line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

}  // namespace detail

inline Values parse(const std::string& text, const std::string& source = "<config>") {
  Values out;
  std::istringstream in(text);
  std::string line, section;
  for (int no = 1; std::getline(in, line); ++no) {
    const std::string where = source + ":" + std::to_string(no);
    const auto s = detail::trim(detail::strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("config", "parse", where + ": malformed section header");
      section = detail::trim(std::string_view(s).substr(1, s.size() - 2));
      if (section.empty()) throw ConfigError("config", "parse", where + ": empty section name");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("config", "parse", where + ": expected key = value");
    const auto key = detail::trim(std::string_view(s).substr(0, eq));
    if (key.empty()) throw ConfigError("config", "parse", where + ": empty key");
    const auto value = detail::trim(std::string_view(s).substr(eq + 1));
    const auto full = section.empty() ? key : section + "." + key;
    if (value.empty()) throw ConfigError("config", "parse", where + ": missing value for '" + full + "'");
    if (value.front() == '[' && value.back() != ']')
      throw ConfigError("config", "parse", where + ": unterminated list for '" + full + "'");
    if (!out.emplace(full, value.front() == '[' ? value : detail::unquote(value, where)).second)
      throw ConfigError("config", "parse", where + ": duplicate key '" + full + "'");
  }
  return out;
}

inline Values load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "load", "cannot read config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

/// Splits "[a, "b", c]" (or a bare comma list) into items.
inline std::vector<std::string> list(const std::string& raw, const std::string& key) {
  auto s = detail::trim(raw);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw ConfigError("config", "parse", key + ": unterminated list");
    s = s.substr(1, s.size() - 2);
  }
  std::vector<std::string> out;
  std::string item;
  char quote = 0;
  auto flush = [&] {
    auto t = detail::trim(item);
    if (!t.empty()) out.push_back(detail::unquote(t, key));
    item.clear();
  };
  for (char c : s) {
    if (quote) {
      if (c == quote) quote = 0;
      item.push_back(c);
    } else if (c == '"' || c == '\'') {
      quote = c;
      item.push_back(c);
    } else if (c == ',') {
      flush();
    } else {
      item.push_back(c);
    }
  }
  flush();
  return out;
}

/// Layers values: later layers win. Keys absent from `defaults` are rejected.
inline Values merge(const Values& defaults, const std::vector<Values>& layers) {
  Values out = defaults;
  for (const auto& layer : layers)
    for (const auto& [k, v] : layer) {
      if (!defaults.count(k)) throw ConfigError("config", "validate", "unknown key '" + k + "'");
      out[k] = v;
    }
  return out;
}

/// "key=value" from a command-line --set flag.
inline std::pair<std::string, std::string> parse_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("config", "parse", "expected section.key=value, got '" + s + "'");
  return {detail::trim(std::string_view(s).substr(0, eq)), detail::trim(std::string_view(s).substr(eq + 1))};
}

// --- Typed access -------------------------------------------------------------------

inline const std::string& raw(const Values& v, const std::string& key) {
  auto it = v.find(key);
  if (it == v.end()) throw ConfigError("config", "validate", "missing key '" + key + "'");
  return it->second;
}

inline long long integer(const Values& v, const std::string& key) {
  const auto& s = raw(v, key);
  long long out = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("config", "validate", key + ": expected an integer, got '" + s + "'");
  return out;
}

inline double number(const Values& v, const std::string& key) {
  const auto& s = raw(v, key);
  try {
    std::size_t used = 0;
    const double out = std::stod(s, &used);
    if (used == s.size()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError("config", "validate", key + ": expected a number, got '" + s + "'");
}

inline bool boolean(const Values& v, const std::string& key) {
  const auto& s = raw(v, key);
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("config", "validate", key + ": expected true or false, got '" + s + "'");
}

/// Canonical text: one "key = value" per line in key order.
inline std::string canonical(const Values& v, const std::set<std::string>& skip = {}) {
  std::string out;
  for (const auto& [k, val] : v)
    if (!skip.count(k)) out += k + " = " + val + "\n";
  return out;
}

/// Renders values back into sectioned form that `parse` reads.
inline std::string to_text(const Values& v) {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  for (const auto& [k, val] : v) {
    const auto dot = k.find('.');
    sections[k.substr(0, dot)].emplace_back(k.substr(dot + 1), val);
  }
  std::string out;
  for (const auto& [name, kv] : sections) {
    out += (out.empty() ? "" : "\n") + std::string("[") + name + "]\n";
    for (const auto& [k, val] : kv) {
      const bool bare = !val.empty() && (val.front() == '[' || val.find_first_of(" #=\"'") == std::string::npos);
      out += k + " = " + (bare ? val : "\"" + val + "\"") + "\n";
    }
  }
  return out;
}

}  // namespace ivpanel::config
