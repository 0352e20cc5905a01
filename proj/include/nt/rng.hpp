#pragma once

#include <cmath>
#include <cstdint>

namespace nt {

// Counter-based splittable generator. Every stochastic component takes an
// explicit stream, so a run is reproducible bit-for-bit given its seed.
// Draws are pure functions of (key, counter); split() derives an
// independent child key, leaving the parent untouched.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : key_(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

    RngStream split(uint64_t label) const {
        RngStream child(0);
        child.key_ = mix(key_ ^ mix(label + 0x632be59bd9b4e019ull));
        child.counter_ = 0;
        return child;
    }

    uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

    // Uniform in [0, 1), 53-bit resolution.
    double next_uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // Box-Muller; u clamped away from 0 so log() stays finite.
        double u = next_uniform();
        if (u < 1e-300) u = 1e-300;
        double v = next_uniform();
        double r = std::sqrt(-2.0 * std::log(u));
        double a = 6.283185307179586476925286766559 * v;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Uniform integer in [0, n), n >= 1. Rejection-free modulo is fine here;
    // bias is negligible for n << 2^64 and determinism is what matters.
    uint64_t next_below(uint64_t n) { return next_u64() % n; }

private:
    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    uint64_t key_ = 0;
    uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace nt
