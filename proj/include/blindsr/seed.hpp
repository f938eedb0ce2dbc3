#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace blindsr {

using Rng = std::mt19937_64;

// 64-bit FNV-1a.
constexpr std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Named derivation: root seed XOR hash(purpose label).
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  return root ^ hash_label(label);
}

// Per-item derivation for parallel work: independent of evaluation order.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(root ^ splitmix64(a)) ^ b);
}

}  // namespace blindsr
