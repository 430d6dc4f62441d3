#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "nsm/kernels.hpp"
#include "nsm/synthgen.hpp"

using namespace nsm;

namespace {

MixtureSpec small_spec() {
    MixtureSpec spec;
    spec.dim = 4;
    spec.seed = 77;
    spec.metric = Metric::cosine;
    ClusterSpec a, b, c;
    a.center = {1, 0, 0, 0};
    a.sigma = 0.1;
    a.size = 5;
    b.center = {0, 1, 0, 0};
    b.sigma = 0.01;
    b.size = 7;
    c.center = {0, 0, 1, 0};
    c.sigma = 0.05;
    c.size = 6;
    spec.clusters = {a, b, c};
    spec.background_count = 10;
    spec.background_extent = 1.0;
    return spec;
}

}  // namespace

TEST_CASE("generate lays out cluster rows, queries, and ratings") {
    const MixtureSpec spec = small_spec();
    const GeneratedData d = generate(spec);

    CHECK(d.collection.count == 5 + 7 + 6 + 10);
    CHECK(d.collection.dim == 4);
    CHECK(d.collection.metric == Metric::cosine);
    CHECK(d.collection.normalized);

    REQUIRE(d.queries.labels ==
            std::vector<std::string>{"cluster_0", "cluster_1", "cluster_2"});
    CHECK(d.queries.vectors.count == 3);
    CHECK(d.queries.vectors.normalized);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(std::abs(norm_sq(d.queries.vectors.row(i), 4) - 1.0) < 1e-6);

    // rating = rank of 1/sigma: sigmas {0.1, 0.01, 0.05} -> ranks {1, 3, 2}
    REQUIRE(d.ratings.entries.size() == 3);
    CHECK(d.ratings.entries[0].rating == 1.0);
    CHECK(d.ratings.entries[1].rating == 3.0);
    CHECK(d.ratings.entries[2].rating == 2.0);
    CHECK(d.ratings.entries[0].label == "cluster_0");

    // rows of cluster i hug the normalized center i
    std::size_t row = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t p = 0; p < spec.clusters[i].size; ++p, ++row) {
            const double sim =
                dot(d.collection.row(row), d.queries.vectors.row(i), 4);
            CHECK(sim > 0.8);
        }
    }
}

TEST_CASE("equal sigmas tie in the ratings") {
    MixtureSpec spec = small_spec();
    spec.clusters[0].sigma = 0.05;
    spec.clusters[2].sigma = 0.05;  // ties with cluster 0
    const GeneratedData d = generate(spec);
    CHECK(d.ratings.entries[0].rating == 1.5);
    CHECK(d.ratings.entries[1].rating == 3.0);
    CHECK(d.ratings.entries[2].rating == 1.5);
}

TEST_CASE("generation is bitwise deterministic and per-cluster streamed") {
    const MixtureSpec spec = small_spec();
    const GeneratedData a = generate(spec);
    const GeneratedData b = generate(spec);
    CHECK(a.collection.data == b.collection.data);
    CHECK(a.queries.vectors.data == b.queries.vectors.data);

    // growing cluster 1 must not disturb cluster 0's draws or the background
    MixtureSpec wider = spec;
    wider.clusters[1].size = 11;
    const GeneratedData w = generate(wider);
    const std::size_t cols = 4;
    for (std::size_t r = 0; r < 5; ++r)  // cluster 0 rows
        for (std::size_t j = 0; j < cols; ++j)
            CHECK(w.collection.row(r)[j] == a.collection.row(r)[j]);
    for (std::size_t p = 0; p < 10; ++p) {  // background rows, shifted by +4
        const float* wa = a.collection.row(18 + p);
        const float* ww = w.collection.row(22 + p);
        for (std::size_t j = 0; j < cols; ++j) CHECK(wa[j] == ww[j]);
    }

    MixtureSpec reseeded = spec;
    reseeded.seed = 78;
    CHECK(generate(reseeded).collection.data != a.collection.data);
}

TEST_CASE("inner-product mixtures stay unnormalized, background in its box") {
    MixtureSpec spec = small_spec();
    spec.metric = Metric::inner_product;
    spec.background_extent = 0.5;
    const GeneratedData d = generate(spec);
    CHECK(d.collection.metric == Metric::inner_product);
    CHECK_FALSE(d.collection.normalized);
    for (std::size_t p = 0; p < 10; ++p) {
        const float* r = d.collection.row(18 + p);
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(r[j] <= 0.5f);
            CHECK(r[j] >= -0.5f);
        }
    }
}

TEST_CASE("mixture validation") {
    MixtureSpec spec = small_spec();
    spec.dim = 0;
    CHECK_THROWS_AS(generate(spec), ParameterError);

    spec = small_spec();
    spec.clusters[1].center = {1, 0};
    CHECK_THROWS_AS(generate(spec), ParameterError);

    spec = small_spec();
    spec.clusters[0].sigma = 0.0;
    CHECK_THROWS_AS(generate(spec), ParameterError);

    spec = small_spec();
    spec.clusters[2].size = 0;
    CHECK_THROWS_AS(generate(spec), ParameterError);

    spec = small_spec();
    spec.background_extent = 0.0;
    CHECK_THROWS_AS(generate(spec), ParameterError);

    MixtureSpec lone;
    lone.dim = 2;
    ClusterSpec only;
    only.center = {1, 0};
    only.sigma = 0.1;
    only.size = 1;
    lone.clusters = {only};
    CHECK_THROWS_AS(generate(lone), ParameterError);  // fewer than 2 points
}

TEST_CASE("make_geometric_spec spaces sigmas geometrically") {
    const MixtureSpec spec =
        make_geometric_spec(8, 4, 100, 0.01, 0.08, 500, 2.0, 9);
    REQUIRE(spec.clusters.size() == 4);
    CHECK(spec.dim == 8);
    CHECK(spec.background_count == 500);
    CHECK(spec.background_extent == 2.0);
    CHECK(spec.clusters[0].sigma == 0.01);
    for (int i = 0; i < 3; ++i) {
        const double r = spec.clusters[i + 1].sigma / spec.clusters[i].sigma;
        CHECK(std::abs(r - 2.0) < 1e-12);  // (0.08/0.01)^(1/3)
    }
    CHECK(std::abs(spec.clusters[3].sigma - 0.08) < 1e-12);
    for (const ClusterSpec& cl : spec.clusters) {
        CHECK(cl.size == 100);
        REQUIRE(cl.center.size() == 8);
        for (const float x : cl.center) {
            CHECK(x <= 2.0f);
            CHECK(x >= -2.0f);
        }
    }

    CHECK_THROWS_AS(make_geometric_spec(8, 0, 10, 0.1, 0.2, 0, 1.0, 9),
                    ParameterError);
    CHECK_THROWS_AS(make_geometric_spec(8, 2, 10, 0.0, 0.2, 0, 1.0, 9),
                    ParameterError);
    CHECK_THROWS_AS(make_geometric_spec(8, 2, 10, 0.3, 0.2, 0, 1.0, 9),
                    ParameterError);

    // a single-sigma spec is allowed and rates everything equal
    const MixtureSpec one = make_geometric_spec(4, 3, 10, 0.05, 0.05, 0, 1.0, 9);
    for (const ClusterSpec& cl : one.clusters) CHECK(cl.sigma == 0.05);
}
