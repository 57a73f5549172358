#pragma once

// Minimal RFC-4180 CSV reading and writing.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ivpanel/error.hpp"

namespace ivpanel::csv {

using Row = std::vector<std::string>;

/// Splits RFC-4180 text into records. Quoted fields may hold commas, doubled
/// quotes and line breaks. A trailing newline does not produce an empty record.
inline std::vector<Row> parse(std::string_view text, const std::string& source = "<memory>") {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;

  // Skip a UTF-8 byte-order mark.
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.empty())
          throw SchemaError("csv", "parse",
                            source + ":" + std::to_string(line) + ": stray quote inside unquoted field");
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        [[fallthrough]];
      case '\n':
        end_row();
        ++line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes)
    throw SchemaError("csv", "parse", source + ": unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("csv", "read", "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline bool needs_quotes(std::string_view s) {
  return s.find_first_of(",\"\r\n") != std::string_view::npos;
}

inline std::string quote(std::string_view s) {
  if (!needs_quotes(s)) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void write_row(std::ostream& os, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) os << ',';
    os << quote(row[i]);
  }
  os << '\n';
}

/// Shortest round-trip decimal representation of a double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// A parsed CSV file with a header row. Cell accessors report the file,
/// line and column name on conversion failures.
class Table {
 public:
  Table(std::string source, std::vector<Row> records) : source_(std::move(source)) {
    if (records.empty()) throw SchemaError("csv", "load", source_ + ": missing header row");
    header_ = std::move(records.front());
    for (std::size_t i = 0; i < header_.size(); ++i) index_[trim(header_[i])] = i;
    rows_.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
    // Drop blank trailing lines.
    while (!rows_.empty() && rows_.back().size() == 1 && rows_.back()[0].empty()) rows_.pop_back();
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      if (rows_[r].size() != header_.size())
        throw SchemaError("csv", "load",
                          source_ + ": record " + std::to_string(r + 2) + " has " +
                              std::to_string(rows_[r].size()) + " fields, header has " +
                              std::to_string(header_.size()));
    }
  }

  static Table from_file(const std::string& path) { return Table(path, parse(read_file(path), path)); }

  const std::string& source() const noexcept { return source_; }
  std::size_t size() const noexcept { return rows_.size(); }
  const Row& header() const noexcept { return header_; }

  bool has_column(const std::string& name) const { return index_.count(name) > 0; }

  /// Throws a SchemaError naming every missing column.
  void require_columns(const std::vector<std::string>& names) const {
    std::string missing;
    for (const auto& n : names) {
      if (!has_column(n)) missing += (missing.empty() ? "" : ", ") + n;
    }
    if (!missing.empty())
      throw SchemaError("csv", "load", source_ + ": missing required column(s): " + missing);
  }

  const std::string& cell(std::size_t row, const std::string& col) const {
    auto it = index_.find(col);
    if (it == index_.end())
      throw SchemaError("csv", "load", source_ + ": missing required column(s): " + col);
    return rows_[row][it->second];
  }

  std::optional<std::string> optional_cell(std::size_t row, const std::string& col) const {
    auto it = index_.find(col);
    if (it == index_.end()) return std::nullopt;
    return rows_[row][it->second];
  }

  double number(std::size_t row, const std::string& col) const {
    const std::string s = trim(cell(row, col));
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v))
      throw SchemaError("csv", "load", where(row, col) + ": expected a finite number, got '" + s + "'");
    return v;
  }

  long long integer(std::size_t row, const std::string& col) const {
    const std::string s = trim(cell(row, col));
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw SchemaError("csv", "load", where(row, col) + ": expected an integer, got '" + s + "'");
    return v;
  }

  std::string where(std::size_t row, const std::string& col) const {
    return source_ + ":" + std::to_string(row + 2) + " column '" + col + "'";
  }

  static std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
  }

 private:
  std::string source_;
  Row header_;
  std::vector<Row> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace ivpanel::csv
