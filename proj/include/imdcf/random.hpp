#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

// Seeded randomness helpers. The std distributions are implementation-defined,
// so uniform draws and shuffles are done by hand to keep seeded outputs stable
// across standard libraries.
namespace imdcf::rng {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Child seed for an independent stream identified by `salt`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    return splitmix64(splitmix64(seed) ^ splitmix64(salt + 0x632be59bd9b4e019ULL));
}

// FNV-1a, used to turn names into salts.
inline std::uint64_t hash_name(std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Uniform double in [0, 1) with 53 random bits.
inline double unit_uniform(Engine& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, bound) by rejection.
inline std::size_t uniform_index(Engine& engine, std::size_t bound) {
    const std::uint64_t n = bound;
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
    std::uint64_t x = engine();
    while (x >= limit) x = engine();
    return static_cast<std::size_t>(x % n);
}

// Fisher-Yates permutation of 0..n-1.
inline std::vector<std::size_t> shuffled_indices(std::size_t n, Engine& engine) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = uniform_index(engine, i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

}  // namespace imdcf::rng
