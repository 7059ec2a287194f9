#pragma once

#include <array>
#include <cstdint>
#include <utility>

namespace micromacro::rng {

/// Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
/// numbers: as easy as 1, 2, 3"). Stateless: every 128-bit counter / 64-bit
/// key pair maps to an independent 128-bit block, which makes streams keyed
/// by (seed, cell, replica, step) bit-reproducible under any scheduling.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Logical stream address. `domain` separates independent uses of the same
/// seed (initial sampling vs. SDE driving noise vs. auxiliary draws).
struct StreamKey {
    std::uint64_t seed = 0;
    std::uint8_t domain = 0;
    std::uint32_t cell = 0;
    std::uint32_t replica = 0;
};

enum : std::uint8_t {
    kDomainInit = 1,     // equilibrium / initial-condition sampling
    kDomainSde = 2,      // Brownian increments of the primary process
    kDomainAux = 3,      // test oracles and miscellaneous sampling
};

/// Raw 128-bit block for (key, step, draw).
std::array<std::uint32_t, 4> random_block(const StreamKey& key, std::uint32_t step,
                                          std::uint32_t draw);

/// Two independent U(0,1) variates (open interval, 53-bit resolution).
std::pair<double, double> uniform_pair(const StreamKey& key, std::uint32_t step,
                                       std::uint32_t draw);

/// Two independent N(0,1) variates via Box-Muller.
std::pair<double, double> normal_pair(const StreamKey& key, std::uint32_t step,
                                      std::uint32_t draw);

} // namespace micromacro::rng
