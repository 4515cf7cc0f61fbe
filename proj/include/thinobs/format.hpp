#pragma once

#include <charconv>
#include <string>

namespace thinobs {

/// Shortest round-trip decimal form; identical bytes for identical doubles.
inline std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace thinobs
