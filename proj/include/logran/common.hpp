#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace logran {

// Validation failures (bad inputs, broken invariants, diverged numerics).
// The CLI maps these to exit code 1.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem / parsing-level failures. The CLI maps these to exit code 2.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ── Deterministic randomness ─────────────────────────────────────────
//
// All stochastic paths run on SplitMix64 streams rather than std::
// distributions, whose output is implementation-defined. A stream is a
// pure function of its seed, so every generator/trainer/decoder output
// is reproducible bit-for-bit from config seeds alone.

inline uint64_t splitmix64_next(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() { return splitmix64_next(state_); }

    // Uniform on [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer on [0, n). n must be positive.
    uint64_t below(uint64_t n) {
        // Multiply-shift; bias is negligible for the small n used here
        // and the mapping is fully deterministic.
        unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * n;
        return static_cast<uint64_t>(wide >> 64);
    }

    // Standard normal via Box-Muller; the paired draw is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Derive an independent stream seed from a base seed and a key.
inline uint64_t derive_seed(uint64_t base, uint64_t key) {
    uint64_t s = base ^ (key + 0x9e3779b97f4a7c15ULL + (base << 6) + (base >> 2));
    return splitmix64_next(s);
}

inline uint64_t derive_seed(uint64_t base, std::string_view key) {
    return derive_seed(base, fnv1a64(key));
}

// ── Small vector helpers ─────────────────────────────────────────────

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline void normalize_inplace(std::vector<double>& v) {
    double n = norm2(v);
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw ValidationError("cannot normalize zero or non-finite vector");
    }
    for (double& x : v) x /= n;
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

// FNV-1a over the raw bytes of a double vector; used for checksums.
inline std::string checksum_hex(std::span<const double> v) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (double d : v) {
        uint64_t bits;
        static_assert(sizeof(bits) == sizeof(d));
        std::memcpy(&bits, &d, sizeof(bits));
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffULL;
            h *= 0x100000001b3ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace logran
