#pragma once

#include <charconv>
#include <string>

namespace homot {

// Shortest round-trip decimal representation (17 significant digits max).
inline std::string fmt_double(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace homot
