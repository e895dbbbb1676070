#pragma once

#include <cstdio>
#include <istream>
#include <string>
#include <vector>

namespace staggered::csv {

// Minimal comma-separated parsing for the panel and weight-file formats.
// Fields never contain embedded commas in these schemas, so no quoting rules.
inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline bool next_row(std::istream& in, std::vector<std::string>& fields) {
  std::string line;
  while (std::getline(in, line)) {
    // Skip blank lines (common at end of hand-edited files).
    bool blank = true;
    for (char c : line)
      if (c != ' ' && c != '\t' && c != '\r') {
        blank = false;
        break;
      }
    if (blank) continue;
    fields = split(line);
    return true;
  }
  return false;
}

// Shortest decimal form that round-trips a double, for stable CSV output.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  double back = 0;
  std::sscanf(buf, "%lf", &back);
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, x);
    std::sscanf(shorter, "%lf", &back);
    if (back == x) return shorter;
  }
  return buf;
}

}  // namespace staggered::csv
