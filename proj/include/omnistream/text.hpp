#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace omnistream {

// Minimal UTF-8 helpers. Inputs are assumed to be valid UTF-8; malformed
// bytes are consumed one at a time and returned as U+FFFD so counting stays
// total and deterministic.

struct DecodedCp {
    char32_t cp;
    std::size_t bytes;  // bytes consumed, >= 1
};

DecodedCp utf8_decode(std::string_view s, std::size_t pos);

/// Number of code points in s.
std::size_t cp_count(std::string_view s);

/// Byte length of the prefix holding the first n code points (clamped).
std::size_t cp_prefix_bytes(std::string_view s, std::size_t n);

std::u32string to_u32(std::string_view s);

/// FNV-1a 64-bit, used for deterministic mock token ids and payload digests.
inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : data) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t fnv1a64_u64(std::uint64_t v, std::uint64_t h = kFnvOffset) {
    for (int i = 0; i < 8; ++i) {
        h ^= static_cast<unsigned char>(v >> (8 * i));
        h *= kFnvPrime;
    }
    return h;
}

std::string hex64(std::uint64_t v);

}  // namespace omnistream
