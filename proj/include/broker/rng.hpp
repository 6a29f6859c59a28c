#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace broker {

// 64-bit FNV-1a. Used for stable substream derivation and config hashing,
// so results do not depend on std::hash.
constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Named substream of a master seed. Adding a consumer never perturbs the
// stream of another one.
inline std::mt19937_64 substream(std::uint64_t master_seed, std::string_view name) {
    return std::mt19937_64(splitmix64(master_seed ^ fnv1a(name)));
}

inline double uniform01(std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace broker
