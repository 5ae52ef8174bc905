#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace taxisim {

// FNV-1a, 64 bit. Stable digest for config hashes and decision contexts.
class Fnv1a {
 public:
  Fnv1a& bytes(std::string_view data) {
    for (unsigned char c : data) {
      value_ ^= c;
      value_ *= 0x100000001b3ULL;
    }
    return *this;
  }

  Fnv1a& u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      value_ ^= (v >> (8 * i)) & 0xffu;
      value_ *= 0x100000001b3ULL;
    }
    return *this;
  }

  Fnv1a& i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }

  std::uint64_t value() const { return value_; }

  std::string hex() const { return to_hex(value_); }

  static std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
  }

 private:
  std::uint64_t value_ = 0xcbf29ce484222325ULL;
};

inline std::string fnv1a_hex(std::string_view data) { return Fnv1a{}.bytes(data).hex(); }

}  // namespace taxisim
