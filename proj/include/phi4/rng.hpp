#pragma once

#include <cmath>
#include <cstdint>

#include "phi4/grid.hpp"

namespace phi4 {

namespace detail {

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

// Counter-based Gaussian stream: every draw is a pure function of
// (base_seed, replica_id, counter), so any draw sequence can be replayed
// exactly and distinct replica ids give independent streams.
struct NoiseStream {
    std::uint64_t base_seed = 0;
    std::uint64_t replica_id = 0;
    std::uint64_t counter = 0;

    NoiseStream() = default;
    NoiseStream(std::uint64_t seed, std::uint64_t replica, std::uint64_t ctr = 0)
        : base_seed(seed), replica_id(replica), counter(ctr) {}

    // Standard normal via Box-Muller on two hashed uniforms; consumes one
    // counter value per draw.
    double normal() {
        std::uint64_t c = counter++;
        std::uint64_t key = detail::mix64(detail::mix64(base_seed) ^
                                          replica_id * 0xd1342543de82ef95ULL);
        std::uint64_t h0 = detail::mix64(key ^ c * 0xaf251af3b0f025b5ULL);
        std::uint64_t h1 = detail::mix64(h0 ^ 0x9e6c63d0876a9a47ULL);
        double u1 = (static_cast<double>(h0 >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
        double u2 = static_cast<double>(h1 >> 11) * 0x1.0p-53;          // [0,1)
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }
};

}  // namespace phi4
