#pragma once

#include <cstdint>
#include <cstring>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stormcast {

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view data,
                              std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t value);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Little-endian float32 block <-> base64.
std::string encode_f32(std::span<const float> values);
std::vector<float> decode_f32(std::string_view text);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads (0 = hardware
/// concurrency). Work is handed out through an atomic counter; results must
/// not depend on the scheduling order.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)> &fn);

} // namespace stormcast
