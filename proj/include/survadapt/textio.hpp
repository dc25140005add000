#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace survadapt {

// Shortest decimal that round-trips the exact double.
inline std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

inline bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* begin = text.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end == begin + text.size();
}

}  // namespace survadapt
