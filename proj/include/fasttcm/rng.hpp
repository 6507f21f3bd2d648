#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace ftcm {

// splitmix64 stream. Self-contained so that generated values are identical
// across standard libraries; std distributions are implementation-defined.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; consumes exactly two uniforms per call.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n). Modulo bias is irrelevant at the scales used here.
    uint64_t below(uint64_t n) { return n == 0 ? 0 : next() % n; }

    // Independent stream derived from this seed and a stream id.
    Rng fork(uint64_t stream) const {
        Rng r(state_ ^ (0x632BE59BD9B4E019ULL * (stream + 1)));
        r.next();
        return r;
    }

private:
    uint64_t state_;
};

constexpr uint64_t fnv1a64(std::string_view s, uint64_t h = 0xCBF29CE484222325ULL) {
    for (char c : s) {
        h ^= static_cast<uint8_t>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

} // namespace ftcm
