#pragma once

// Synthetic mixtures with controlled peak sharpness: isotropic Gaussian
// clusters over a uniform background.  Each cluster center becomes a rated
// query whose rating is the rank of 1/sigma, so sharper clusters carry
// higher ground-truth ratings by construction.
//
// Reproducibility: every cluster draws from its own derived PRNG stream
// (stream i for cluster i, stream n_clusters for the background, stream
// n_clusters+1 for auto-generated centers), so outputs are bitwise stable
// under a fixed spec + seed.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nsm/error.hpp"
#include "nsm/evalstats.hpp"
#include "nsm/rng.hpp"
#include "nsm/vecstore.hpp"

namespace nsm {

struct ClusterSpec {
    std::vector<float> center;
    double sigma;
    std::size_t size;
};

struct MixtureSpec {
    std::size_t dim = 0;
    std::vector<ClusterSpec> clusters;
    std::size_t background_count = 0;
    double background_extent = 1.0;
    std::uint64_t seed = 0;
    Metric metric = Metric::cosine;
};

struct GeneratedData {
    VectorCollection collection;
    LabeledQuerySet queries;   // one per cluster center, labeled cluster_<i>
    RatingsTable ratings;      // rating = rank of 1/sigma (sharper = higher)
};

namespace detail {

inline void validate(const MixtureSpec& spec) {
    if (spec.dim < 1) throw ParameterError("mixture dim must be >= 1");
    if (!(spec.background_extent > 0.0))
        throw ParameterError("background extent must be positive");
    std::size_t total = spec.background_count;
    for (std::size_t i = 0; i < spec.clusters.size(); ++i) {
        const ClusterSpec& cl = spec.clusters[i];
        if (cl.center.size() != spec.dim)
            throw ParameterError("cluster " + std::to_string(i) +
                                 " center dim mismatch");
        if (!(cl.sigma > 0.0))
            throw ParameterError("cluster " + std::to_string(i) +
                                 " sigma must be positive");
        if (cl.size < 1)
            throw ParameterError("cluster " + std::to_string(i) +
                                 " size must be >= 1");
        total += cl.size;
    }
    if (total < 2) throw ParameterError("mixture must contain at least 2 points");
}

}  // namespace detail

inline GeneratedData generate(const MixtureSpec& spec) {
    detail::validate(spec);
    const std::size_t d = spec.dim;
    const std::size_t nc = spec.clusters.size();

    GeneratedData out;
    VectorCollection& c = out.collection;
    c.dim = d;
    c.metric = spec.metric;

    for (std::size_t i = 0; i < nc; ++i) {
        const ClusterSpec& cl = spec.clusters[i];
        GaussianStream z(derive_stream_seed(spec.seed, i));
        for (std::size_t p = 0; p < cl.size; ++p) {
            for (std::size_t j = 0; j < d; ++j)
                c.data.push_back(static_cast<float>(
                    static_cast<double>(cl.center[j]) + cl.sigma * z.next()));
            ++c.count;
        }
    }
    if (spec.background_count > 0) {
        std::mt19937_64 bg(derive_stream_seed(spec.seed, nc));
        for (std::size_t p = 0; p < spec.background_count; ++p) {
            for (std::size_t j = 0; j < d; ++j)
                c.data.push_back(static_cast<float>(
                    spec.background_extent * (2.0 * uniform01(bg) - 1.0)));
            ++c.count;
        }
    }

    out.queries.vectors.dim = d;
    out.queries.vectors.metric = spec.metric;
    std::vector<double> inv_sigma(nc);
    for (std::size_t i = 0; i < nc; ++i) {
        const ClusterSpec& cl = spec.clusters[i];
        out.queries.labels.push_back("cluster_" + std::to_string(i));
        out.queries.vectors.data.insert(out.queries.vectors.data.end(),
                                        cl.center.begin(), cl.center.end());
        ++out.queries.vectors.count;
        inv_sigma[i] = 1.0 / cl.sigma;
    }
    const std::vector<double> ranks = average_ranks(inv_sigma);
    for (std::size_t i = 0; i < nc; ++i)
        out.ratings.entries.push_back({out.queries.labels[i], ranks[i]});

    if (spec.metric == Metric::cosine) {
        out.collection = normalize(std::move(out.collection));
        if (out.queries.vectors.count > 0)
            out.queries.vectors = normalize(std::move(out.queries.vectors));
    }
    return out;
}

// Convenience builder: n_clusters of equal size with geometrically spaced
// sigmas from sigma_min to sigma_max and centers drawn uniformly from
// [-extent, extent]^dim.
inline MixtureSpec make_geometric_spec(std::size_t dim, std::size_t n_clusters,
                                       std::size_t cluster_size, double sigma_min,
                                       double sigma_max, std::size_t background_count,
                                       double extent, std::uint64_t seed,
                                       Metric metric = Metric::cosine) {
    if (n_clusters < 1) throw ParameterError("need at least one cluster");
    if (!(sigma_min > 0.0) || !(sigma_max >= sigma_min))
        throw ParameterError("need 0 < sigma_min <= sigma_max");
    MixtureSpec spec;
    spec.dim = dim;
    spec.background_count = background_count;
    spec.background_extent = extent;
    spec.seed = seed;
    spec.metric = metric;
    std::mt19937_64 centers(derive_stream_seed(seed, n_clusters + 1));
    const double ratio = n_clusters > 1
                             ? std::pow(sigma_max / sigma_min,
                                        1.0 / static_cast<double>(n_clusters - 1))
                             : 1.0;
    double sigma = sigma_min;
    for (std::size_t i = 0; i < n_clusters; ++i) {
        ClusterSpec cl;
        cl.sigma = sigma;
        cl.size = cluster_size;
        cl.center.resize(dim);
        for (std::size_t j = 0; j < dim; ++j)
            cl.center[j] = static_cast<float>(extent * (2.0 * uniform01(centers) - 1.0));
        spec.clusters.push_back(std::move(cl));
        sigma *= ratio;
    }
    return spec;
}

}  // namespace nsm
