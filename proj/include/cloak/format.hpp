#pragma once

#include <charconv>
#include <string>

namespace cloak {

// Shortest decimal string that round-trips to the same IEEE double.
inline std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace cloak
