#pragma once

// Similarity kernels.
//
// Vectors are stored as 32-bit floats but all similarity accumulation is
// done in 64-bit doubles (float x float promoted to double is exact, so the
// only rounding happens in the additions).  Every kernel uses the same eight
// accumulators combined in the same fixed order, which makes results
// bitwise-reproducible regardless of caller and of input type (float rows
// or pre-widened double rows).

#include <cstddef>

namespace nsm {

template <typename A, typename B>
inline double dot(const A* a, const B* b, std::size_t d) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
    std::size_t i = 0;
    for (; i + 8 <= d; i += 8) {
        s0 += static_cast<double>(a[i + 0]) * static_cast<double>(b[i + 0]);
        s1 += static_cast<double>(a[i + 1]) * static_cast<double>(b[i + 1]);
        s2 += static_cast<double>(a[i + 2]) * static_cast<double>(b[i + 2]);
        s3 += static_cast<double>(a[i + 3]) * static_cast<double>(b[i + 3]);
        s4 += static_cast<double>(a[i + 4]) * static_cast<double>(b[i + 4]);
        s5 += static_cast<double>(a[i + 5]) * static_cast<double>(b[i + 5]);
        s6 += static_cast<double>(a[i + 6]) * static_cast<double>(b[i + 6]);
        s7 += static_cast<double>(a[i + 7]) * static_cast<double>(b[i + 7]);
    }
    for (; i < d; ++i)
        s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
}

template <typename A>
inline double norm_sq(const A* a, std::size_t d) {
    return dot(a, a, d);
}

}  // namespace nsm
