#pragma once

#include <cstdint>
#include <random>

namespace cpspan {

// splitmix64 finalizer
inline std::uint64_t hash_mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Derives an independent stream from a master seed and up to three salts.
// Every randomized operation in the project gets its own derived seed so
// stages stay reproducible in isolation.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t h = hash_mix(seed + 0x632be59bd9b4e019ull);
    h = hash_mix(h ^ a);
    h = hash_mix(h ^ b);
    h = hash_mix(h ^ c);
    return h;
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                   std::uint64_t c = 0) {
    return std::mt19937_64(derive_seed(seed, a, b, c));
}

// Salts for the per-stage RNG streams.
namespace rng_salt {
inline constexpr std::uint64_t mask = 1;
inline constexpr std::uint64_t resample = 2;
inline constexpr std::uint64_t synth = 3;
inline constexpr std::uint64_t init = 4;
inline constexpr std::uint64_t pretrain_shuffle = 5;
inline constexpr std::uint64_t pretrain_resample = 6;
inline constexpr std::uint64_t align_shuffle = 7;
inline constexpr std::uint64_t align_resample = 8;
inline constexpr std::uint64_t kmeans_seed = 9;
inline constexpr std::uint64_t final_kmeans = 10;
}  // namespace rng_salt

}  // namespace cpspan
