#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ctp {

using Rng = std::mt19937_64;

// Uniform double in [0, 1) from exactly one engine call. Distribution adapters
// from <random> may consume a varying number of calls per draw, which would
// break the fixed rng-consumption order the samplers rely on.
inline double canonical(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). n must be > 0.
inline std::size_t uniform_below(Rng& rng, std::size_t n) {
    std::size_t i = static_cast<std::size_t>(canonical(rng) * static_cast<double>(n));
    return i < n ? i : n - 1;
}

// Uniform integer in [lo, hi] inclusive.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(uniform_below(rng, static_cast<std::size_t>(hi - lo + 1)));
}

// First m elements of a uniform random permutation of [0, n) via partial
// Fisher-Yates. Consumes exactly m draws.
inline std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t m) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t j = i + uniform_below(rng, n - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(m);
    return pool;
}

} // namespace ctp
