#pragma once

// Hand-constructed 2D geometry with known alpha values, lifted onto the
// d=3 unit sphere so cosine similarity reproduces the planar distances.
//
// Two regions:
//  * an "unstable" 10-point neighborhood around the origin: two tight
//    mutual pairs (4 points with in-set nearest neighbors) plus 6 loose
//    points whose nearest neighbors are dedicated attractor points sitting
//    just outside the neighborhood -> alpha = 4/10
//  * an isolated mutual-NN pair far away -> alpha = 1
//
// Lift: (x, y) -> (x/20, y/20, sqrt(1 - (x^2+y^2)/400)).  For unit vectors
// cosine order equals chord-distance order; planar margins (>= 0.007 in
// chord units) dwarf the lift's z perturbations (<= 1e-3 across radii,
// ~1e-10 within an equal-radius group), so the planar nearest-neighbor
// structure survives exactly.

#include <cmath>
#include <cstdint>
#include <vector>

#include "nsm/vecstore.hpp"

namespace fixture {

struct TwoRegion {
    nsm::VectorCollection collection;         // d=3, cosine, unit rows
    std::vector<std::uint64_t> region;        // the 10-point neighborhood
    std::vector<std::uint64_t> stable_pair;   // the isolated mutual pair
    std::vector<float> q_region;              // query at the region center
    std::vector<float> q_pair;                // query at the pair midpoint
    std::uint64_t region_hits = 4;
};

inline std::vector<float> lift(double x, double y) {
    const double px = x / 20.0;
    const double py = y / 20.0;
    const double pz = std::sqrt(1.0 - (x * x + y * y) / 400.0);
    return {static_cast<float>(px), static_cast<float>(py), static_cast<float>(pz)};
}

inline TwoRegion make_two_region() {
    TwoRegion f;
    std::vector<std::vector<float>> rows;

    // ids 0-3: two tight mutual pairs at planar radius ~0.5 (offsets are
    // perpendicular to the radial direction so twins share a radius)
    rows.push_back(lift(0.5, -0.05));
    rows.push_back(lift(0.5, 0.05));
    rows.push_back(lift(-0.5, -0.05));
    rows.push_back(lift(-0.5, 0.05));
    // ids 4-9: loose members on the unit circle
    for (int j = 0; j < 6; ++j) {
        const double a = j * M_PI / 3.0;
        rows.push_back(lift(std::cos(a), std::sin(a)));
    }
    // ids 10-15: attractors at radius 1.35, one per loose member (0.35 from
    // its member, vs >= 0.5 to anything else, vs 1.35 from the query)
    for (int j = 0; j < 6; ++j) {
        const double a = j * M_PI / 3.0;
        rows.push_back(lift(1.35 * std::cos(a), 1.35 * std::sin(a)));
    }
    // ids 16-17: isolated mutual pair near (10, 10), tangential offset
    const double t = 0.05 / std::sqrt(2.0);
    rows.push_back(lift(10.0 - t, 10.0 + t));
    rows.push_back(lift(10.0 + t, 10.0 - t));

    f.collection.dim = 3;
    f.collection.metric = nsm::Metric::cosine;
    for (const auto& r : rows) {
        f.collection.data.insert(f.collection.data.end(), r.begin(), r.end());
        ++f.collection.count;
    }
    f.collection.normalized = true;  // unit by construction

    for (std::uint64_t id = 0; id < 10; ++id) f.region.push_back(id);
    f.stable_pair = {16, 17};
    f.q_region = lift(0.0, 0.0);
    const std::vector<float> mid = lift(10.0, 10.0);
    const double n = std::sqrt(static_cast<double>(mid[0]) * mid[0] +
                               static_cast<double>(mid[1]) * mid[1] +
                               static_cast<double>(mid[2]) * mid[2]);
    f.q_pair = {static_cast<float>(mid[0] / n), static_cast<float>(mid[1] / n),
                static_cast<float>(mid[2] / n)};
    return f;
}

}  // namespace fixture
