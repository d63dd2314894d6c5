#pragma once

#include <array>
#include <charconv>
#include <string>

namespace kstab {

/// Shortest decimal string that round-trips the double exactly; the one
/// number format used in every serialized artifact so that repeated runs
/// are byte-identical.
inline std::string shortest_double(double v) {
  std::array<char, 40> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace kstab
