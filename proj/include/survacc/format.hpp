#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace survacc {

/// Shortest round-trip scientific representation, independent of the locale.
inline std::string format_double(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::scientific);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

}  // namespace survacc
