#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace hnm {

// FNV-1a, 64-bit. Used for n-gram feature hashing.
constexpr std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Hash128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  friend bool operator==(const Hash128&, const Hash128&) = default;
  std::string hex() const;
};

// FNV-1a, 128-bit. Content key for exact deduplication.
Hash128 fnv1a128(std::string_view bytes);

struct Hash128Hasher {
  std::size_t operator()(const Hash128& h) const noexcept {
    return static_cast<std::size_t>(h.lo ^ (h.hi * 0x9e3779b97f4a7c15ULL));
  }
};

}  // namespace hnm
