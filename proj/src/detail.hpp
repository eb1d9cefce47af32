#pragma once

// Internal file/CSV helpers shared by the library's .cpp files. Not installed
// and not part of the public API.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qns/errors.hpp"

namespace qns::detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedFile("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw MalformedFile("cannot open file for writing: " + path);
  out << content;
  if (!out) throw MalformedFile("write failed: " + path);
}

// Full-precision, locale-independent double formatting for CSV output.
inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Splits a CSV line on commas (fields in this project never contain commas
// or quotes).
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

// Parses a double, requiring the whole field to be consumed.
inline double parse_double(const std::string& field, const std::string& what) {
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(field, &pos);
  } catch (const std::exception&) {
    throw MalformedFile("bad " + what + " value: '" + field + "'");
  }
  while (pos < field.size() && (field[pos] == ' ' || field[pos] == '\r')) ++pos;
  if (pos != field.size())
    throw MalformedFile("bad " + what + " value: '" + field + "'");
  return value;
}

// Parses a non-negative integer, requiring the whole field to be consumed.
inline std::uint64_t parse_uint(const std::string& field,
                                const std::string& what) {
  if (field.empty() || field[0] == '-')
    throw MalformedFile("bad " + what + " value: '" + field + "'");
  std::size_t pos = 0;
  unsigned long long value = 0;
  try {
    value = std::stoull(field, &pos);
  } catch (const std::exception&) {
    throw MalformedFile("bad " + what + " value: '" + field + "'");
  }
  while (pos < field.size() && (field[pos] == ' ' || field[pos] == '\r')) ++pos;
  if (pos != field.size())
    throw MalformedFile("bad " + what + " value: '" + field + "'");
  return value;
}

// Splits file content into lines, tolerating trailing newline and CRLF.
inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char ch : text) {
    if (ch == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) {
    if (cur.back() == '\r') cur.pop_back();
    lines.push_back(cur);
  }
  return lines;
}

}  // namespace qns::detail
