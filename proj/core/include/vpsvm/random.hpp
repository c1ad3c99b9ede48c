#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace vpsvm {

using rng_type = std::mt19937_64;

/// splitmix64 finalizer.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27U)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31U);
}

/// Purpose tags for derived random streams.
enum class stream : std::uint64_t {
    partition = 1,
    subsample = 2,
    chunks = 3,
    folds = 4,
    toy_train = 5,
    toy_eval = 6,
    calibration = 7,
    misc = 8,
};

/**
 * Derives an independent seed from a base seed and a path of integers, e.g.
 * (seed, stream::folds, cell_id). Every consumer gets its own stream, so the
 * result never depends on the order in which parallel tasks run.
 */
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t base, stream purpose,
                                                  std::initializer_list<std::uint64_t> path = {}) noexcept {
    std::uint64_t h = mix64(base ^ mix64(static_cast<std::uint64_t>(purpose)));
    for (const std::uint64_t p : path) {
        h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
    }
    return h;
}

/// Unbiased integer in [0, n). Implemented here rather than via
/// std::uniform_int_distribution so results do not depend on the standard library.
[[nodiscard]] inline std::uint64_t uniform_index(rng_type &rng, std::uint64_t n) {
    const std::uint64_t limit = rng_type::max() - (rng_type::max() % n);
    std::uint64_t v = rng();
    while (v >= limit) {
        v = rng();
    }
    return v % n;
}

/// Uniform double in [0, 1) with 53 random bits.
[[nodiscard]] inline double uniform_unit(rng_type &rng) {
    return static_cast<double>(rng() >> 11U) * 0x1.0p-53;
}

}  // namespace vpsvm
