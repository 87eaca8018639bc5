#pragma once

#include <cmath>
#include <cstdint>

namespace mpmgan {

// Splitmix64 stream. The entire generator state is one u64, which keeps
// checkpointing trivial: normal() deliberately does not cache the spare
// Box-Muller value so that the state is exactly `state`.
struct Rng {
    uint64_t state = 0;

    Rng() = default;
    explicit Rng(uint64_t seed) : state(seed) {}

    uint64_t next_u64() {
        state += 0x9E3779B97F4A7C15ULL;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // [-1, 1)
    double uniform_pm1() { return 2.0 * next_unit() - 1.0; }

    // Box-Muller, cosine branch only; two uniforms per draw.
    double normal() {
        const double u1 = 1.0 - next_unit();  // (0, 1], keeps log() finite
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // Derives an independent child stream without advancing this one.
    Rng child(uint64_t tag) const {
        uint64_t z = state ^ (tag * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL);
        z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCDULL;
        z = (z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53ULL;
        return Rng(z ^ (z >> 33));
    }
};

}  // namespace mpmgan
