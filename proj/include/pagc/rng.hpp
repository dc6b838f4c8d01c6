#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace pagc {

// FNV-1a, used for seed derivation and file checksums. Stable across
// platforms, unlike std::hash.
inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t hash_combine(uint64_t h, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    return fnv1a(b, 8, h);
}

inline uint64_t hash_combine(uint64_t h, std::string_view s) {
    return fnv1a(s.data(), s.size(), h);
}

// seed_from("label", a, b, ...) derives independent stream seeds from a
// label plus integer keys.
template <class... Keys>
uint64_t seed_from(std::string_view label, Keys... keys) {
    uint64_t h = fnv1a(label.data(), label.size());
    ((h = hash_combine(h, static_cast<uint64_t>(keys))), ...);
    return h;
}

// Seeded random stream with a fixed engine-word budget per draw:
// uniform() and uniform_int() consume one mt19937 output, normal()
// always consumes two (Box-Muller without caching). std::*_distribution
// is avoided because its consumption pattern is implementation-defined.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : eng_(static_cast<uint32_t>(seed ^ (seed >> 32))) {}

    // [0, 1), 24-bit resolution
    double uniform() { return (eng_() >> 8) * (1.0 / 16777216.0); }

    // zero-mean unit-variance normal; exactly two engine words
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // uniform over {0, ..., n-1}; exactly one engine word
    uint32_t uniform_int(uint32_t n) {
        uint32_t v = static_cast<uint32_t>(uniform() * n);
        return v >= n ? n - 1 : v;
    }

private:
    std::mt19937 eng_;
};

}  // namespace pagc
