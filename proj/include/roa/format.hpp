#pragma once

#include <array>
#include <charconv>
#include <stdexcept>
#include <string>
#include <system_error>

namespace roa {

/// Shortest decimal string that round-trips to the same double.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf.data(), ptr);
}

}  // namespace roa
