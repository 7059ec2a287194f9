#include "micromacro/rng.hpp"

#include <cmath>

namespace micromacro::rng {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo)
{
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> round_once(std::array<std::uint32_t, 4> c,
                                               std::array<std::uint32_t, 2> k)
{
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, c[0], hi0, lo0);
    mulhilo(kPhiloxM1, c[2], hi1, lo1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline double to_unit_open(std::uint32_t hi, std::uint32_t lo)
{
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    // 53 significant bits, shifted into (0,1).
    return static_cast<double>(bits >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

// cos(2 pi u) and sin(2 pi u) for u in (0,1): quadrant reduction plus Taylor
// sums on [-pi/4, pi/4] (exact rational coefficients, |error| < 1e-15).
inline void sincos_turn(double u, double& cos_out, double& sin_out)
{
    const double scaled = 4.0 * u;
    const int k = static_cast<int>(scaled + 0.5);
    const double phi = (scaled - k) * M_PI_2;
    const double x2 = phi * phi;
    const double c =
        1.0 +
        x2 * (-1.0 / 2 +
              x2 * (1.0 / 24 +
                    x2 * (-1.0 / 720 +
                          x2 * (1.0 / 40320 +
                                x2 * (-1.0 / 3628800 +
                                      x2 * (1.0 / 479001600 -
                                            x2 / 87178291200.0))))));
    const double s =
        phi *
        (1.0 +
         x2 * (-1.0 / 6 +
               x2 * (1.0 / 120 +
                     x2 * (-1.0 / 5040 +
                           x2 * (1.0 / 362880 +
                                 x2 * (-1.0 / 39916800 +
                                       x2 * (1.0 / 6227020800.0 -
                                             x2 / 1307674368000.0)))))));
    switch (k & 3) {
    case 0:
        cos_out = c;
        sin_out = s;
        return;
    case 1:
        cos_out = -s;
        sin_out = c;
        return;
    case 2:
        cos_out = -c;
        sin_out = -s;
        return;
    default:
        cos_out = s;
        sin_out = -c;
        return;
    }
}

} // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key)
{
    for (int r = 0; r < 10; ++r) {
        if (r > 0) {
            key[0] += kPhiloxW0;
            key[1] += kPhiloxW1;
        }
        counter = round_once(counter, key);
    }
    return counter;
}

std::array<std::uint32_t, 4> random_block(const StreamKey& key, std::uint32_t step,
                                          std::uint32_t draw)
{
    const std::array<std::uint32_t, 2> k = {static_cast<std::uint32_t>(key.seed),
                                            static_cast<std::uint32_t>(key.seed >> 32)};
    const std::uint32_t c0 =
        (static_cast<std::uint32_t>(key.domain) << 24) | (key.cell & 0x00FFFFFFu);
    return philox4x32({c0, key.replica, step, draw}, k);
}

std::pair<double, double> uniform_pair(const StreamKey& key, std::uint32_t step,
                                       std::uint32_t draw)
{
    const auto b = random_block(key, step, draw);
    return {to_unit_open(b[0], b[1]), to_unit_open(b[2], b[3])};
}

std::pair<double, double> normal_pair(const StreamKey& key, std::uint32_t step,
                                      std::uint32_t draw)
{
    const auto [u1, u2] = uniform_pair(key, step, draw);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    double c, s;
    sincos_turn(u2, c, s);
    return {radius * c, radius * s};
}

} // namespace micromacro::rng
