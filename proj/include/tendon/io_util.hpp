#pragma once

#include <charconv>
#include <string>

namespace tendon {

// Shortest decimal string that parses back to the same double; keeps every
// emitted CSV deterministic and lossless.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace tendon
