// Minimal CSV tables: comma separated, header row first, '.' as decimal
// point, numbers written in their shortest round-tripping form.

#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace probchain::csv {

inline std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("cannot format number");
  return {buf, end};
}

inline std::string format_number(std::int64_t v) { return std::to_string(v); }
inline std::string format_number(int v) { return std::to_string(v); }
inline std::string format_number(std::uint64_t v) { return std::to_string(v); }

inline double parse_double(std::string_view s) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size())
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return v;
}

inline std::int64_t parse_int(std::string_view s) {
  std::int64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size())
    throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::out_of_range("no column '" + std::string(name) + "'");
  }

  friend bool operator==(const Table&, const Table&) = default;
};

namespace detail {
inline bool needs_quotes(std::string_view s) {
  return s.find_first_of(",\"\r\n") != std::string_view::npos;
}

inline void write_field(std::ostream& os, std::string_view s) {
  if (!needs_quotes(s)) {
    os << s;
    return;
  }
  os << '"';
  for (char c : s) {
    if (c == '"') os << '"';
    os << c;
  }
  os << '"';
}

inline std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw std::invalid_argument("unterminated quoted CSV field");
  out.push_back(std::move(field));
  return out;
}
}  // namespace detail

inline void write(std::ostream& os, const Table& t) {
  auto write_row = [&os](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      detail::write_field(os, row[i]);
    }
    os << '\n';
  };
  write_row(t.header);
  for (const auto& r : t.rows) write_row(r);
}

inline std::string to_string(const Table& t) {
  std::ostringstream os;
  write(os, t);
  return os.str();
}

// Quoted fields may not span lines; none of our outputs produce that.
inline Table read(std::istream& is) {
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto rec = detail::split_record(line);
    if (first) {
      t.header = std::move(rec);
      first = false;
      continue;
    }
    if (rec.size() != t.header.size())
      throw std::invalid_argument("CSV row has " + std::to_string(rec.size()) +
                                  " fields, header has " +
                                  std::to_string(t.header.size()));
    t.rows.push_back(std::move(rec));
  }
  if (first) throw std::invalid_argument("CSV input has no header row");
  return t;
}

inline Table parse(std::string_view text) {
  std::istringstream is{std::string(text)};
  return read(is);
}

}  // namespace probchain::csv
