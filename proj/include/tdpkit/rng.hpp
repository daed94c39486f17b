#pragma once

#include <cstdint>
#include <string_view>

namespace tdpkit {

// SplitMix64 finalizer. Used as a counter-based generator: the value for
// (key, counter) is mix(key + counter * golden), so any row or stream can be
// regenerated independently of execution order.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(seed ^ mix64(stream ^ 0x5851f42d4c957f2dULL));
}

constexpr std::uint64_t counter_draw(std::uint64_t key, std::uint64_t counter) noexcept {
  return mix64(key + counter * 0x9e3779b97f4a7c15ULL);
}

// Master-seed fan-out: an independent child seed per (tag, index).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                    std::uint64_t index = 0) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a over the tag
  for (char c : tag) {
    h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
  }
  return stream_key(master ^ h, index);
}

} // namespace tdpkit
