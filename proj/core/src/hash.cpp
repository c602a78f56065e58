#include "hnm/hash.hpp"

#include <cstdio>

namespace hnm {

Hash128 fnv1a128(std::string_view bytes) {
  using u128 = unsigned __int128;
  constexpr u128 kPrime = (static_cast<u128>(1) << 88) + 0x13b;
  u128 h = (static_cast<u128>(0x6c62272e07bb0142ULL) << 64) | 0x62b821756295c58dULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= kPrime;
  }
  return Hash128{static_cast<std::uint64_t>(h >> 64), static_cast<std::uint64_t>(h)};
}

std::string Hash128::hex() const {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(hi),
                static_cast<unsigned long long>(lo));
  return buf;
}

}  // namespace hnm
