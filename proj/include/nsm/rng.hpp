#pragma once

// Deterministic randomness helpers.
//
// std::mt19937_64 has a standard-pinned output sequence, but the standard
// *distributions* (and std::shuffle) do not, so every transform from raw
// 64-bit draws to usable values lives here.  Identical seeds therefore give
// bitwise-identical streams on every platform and standard library.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace nsm {

// Fast, well-mixed 64->64 hash (splitmix64 finalizer).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Decorrelated seed for a named substream of a base seed.
inline std::uint64_t derive_stream_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(base + 0x632BE59BD9B4E019ull * (stream + 1));
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n).  Multiply-shift reduction; bias is O(n / 2^64).
inline std::uint64_t uniform_index(std::mt19937_64& g, std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(g()) * n) >> 64);
}

// In-place Fisher-Yates shuffle with a pinned draw sequence.
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& g) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_index(g, i));
        std::swap(v[i - 1], v[j]);
    }
}

// Standard normal variates via Box-Muller, one cached spare per pair.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : gen_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01(gen_);
        const double u2 = uniform01(gen_);
        // 1 - u1 is in (0, 1], so the log is finite.
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        const double t = 2.0 * M_PI * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace nsm
