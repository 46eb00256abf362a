#pragma once

// Portable pseudo-random source. Bit-exact definition, so that other
// implementations can reproduce the same noise:
//
//   state  <- state + 0x9E3779B97F4A7C15            (mod 2^64)
//   z      <- state
//   z      <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z      <- (z ^ (z >> 27)) * 0x94D049BB133111EB
//   output <- z ^ (z >> 31)
//
// uniform_open_left():  ((output >> 11) + 1) * 2^-53   in (0, 1]
// uniform():            (output >> 11) * 2^-53         in [0, 1)
// normal(): Box-Muller on consecutive draws u1 = uniform_open_left(),
//   u2 = uniform(); r = sqrt(-2 ln u1); yields r cos(2 pi u2) and then
//   r sin(2 pi u2) on the following call.

#include <cmath>
#include <cstdint>
#include <numbers>

#include "tikreg/linops.hpp"

namespace tikreg {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform_open_left() noexcept { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open_left();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(angle);
        has_spare_ = true;
        return r * std::cos(angle);
    }

    Vector normal_vector(Eigen::Index n) {
        Vector out(n);
        for (Eigen::Index i = 0; i < n; ++i) out[i] = normal();
        return out;
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace tikreg
