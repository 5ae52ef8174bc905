#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace taxisim {

// Simulated time and durations, in whole milliseconds.
using Millis = std::int64_t;

inline constexpr Millis kMillisPerSecond = 1000;

inline Millis seconds_to_millis(double seconds) {
  return static_cast<Millis>(std::llround(seconds * 1000.0));
}

inline constexpr double millis_to_seconds(Millis ms) {
  return static_cast<double>(ms) / 1000.0;
}

// Exact decimal rendering of a millisecond count as seconds ("12.345").
inline std::string format_seconds(Millis ms) {
  const bool negative = ms < 0;
  const std::uint64_t magnitude =
      negative ? static_cast<std::uint64_t>(-(ms + 1)) + 1 : static_cast<std::uint64_t>(ms);
  std::string frac = std::to_string(magnitude % 1000);
  frac.insert(0, 3 - frac.size(), '0');
  return (negative ? "-" : "") + std::to_string(magnitude / 1000) + "." + frac;
}

}  // namespace taxisim
