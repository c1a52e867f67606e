#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace cpreg {

using rng_t = std::mt19937_64;

/* SplitMix64 step; used only to spread seeds, never as the simulation stream. */
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d4a2ca9da2de3bULL;
    return z ^ (z >> 31);
}

/* Deterministic per-replica seed: replicas are independent streams and the
   mapping is stable across thread counts and platforms. */
inline std::uint64_t replica_seed(std::uint64_t master_seed, std::uint64_t replica_index,
                                  std::uint64_t salt = 0) {
    std::uint64_t s = master_seed;
    std::uint64_t a = splitmix64(s);
    s ^= replica_index * 0xd6e8feb86659fd93ULL;
    std::uint64_t b = splitmix64(s);
    s ^= salt * 0xa0761d6478bd642fULL;
    std::uint64_t c = splitmix64(s);
    return a ^ (b + 0x9e3779b97f4a7c15ULL) ^ (c << 1);
}

/* Uniform double in [0, 1); 53 random bits, bit-stable for a given stream. */
inline double u01(rng_t& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/* Exponential with given rate; u01 < 1 keeps the log argument positive. */
inline double exp_rv(rng_t& rng, double rate) {
    return -std::log(1.0 - u01(rng)) / rate;
}

/* Unbiased uniform integer in [0, n); rejection keeps the draw exact. */
inline std::uint64_t uniform_below(rng_t& rng, std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

}  // namespace cpreg
