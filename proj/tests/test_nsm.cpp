#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <unordered_set>

#include "fixtures.hpp"
#include "nsm/nsm.hpp"
#include "nsm/synthgen.hpp"
#include "oracles.hpp"

using namespace nsm;

namespace {

// index + exact neighbor table in exact-search configuration (nlist = 1)
struct ExactEngine {
    VectorCollection c;
    IvfIndex index;
    NeighborTable table;

    explicit ExactEngine(VectorCollection coll) : c(std::move(coll)) {
        index = build_index(c, 1, 0);
        table = batch_nn1(index, index.nlist);
    }
};

}  // namespace

TEST_CASE("constructed fixture: 4-of-10 region and a stable pair") {
    const fixture::TwoRegion f = fixture::make_two_region();
    ExactEngine e(f.collection);

    // the constructed geometry really has the intended neighbor structure
    CHECK(e.table.nn1 == oracle::nn1_table(e.c));

    CHECK(alpha_stability(f.region, e.table) == 0.4);
    CHECK(stable_hits(f.region, e.table) == f.region_hits);
    CHECK(alpha_stability(f.stable_pair, e.table) == 1.0);

    // the query at the region center selects exactly those 10 ids
    const NsmScore region = nsm_fast(f.q_region, e.index, e.table, 10, 1);
    CHECK(region.alpha() == 0.4);
    CHECK(region.hits == 4);
    const KnnResult nk = search(e.index, f.q_region, 10, 1);
    const std::unordered_set<std::uint64_t> got(nk.ids.begin(), nk.ids.end());
    for (const auto id : f.region) CHECK(got.count(id) == 1);

    const NsmScore pair = nsm_fast(f.q_pair, e.index, e.table, 2, 1);
    CHECK(pair.alpha() == 1.0);

    // naive path agrees on the fixture
    CHECK(nsm_naive(f.q_region, e.index, 10, 1).hits == 4);
    CHECK(nsm_naive(f.q_pair, e.index, 2, 1).hits == 2);
}

TEST_CASE("alpha_stability matches the brute-force oracle on random subsets") {
    const VectorCollection c = oracle::random_unit(30, 2, 207);
    ExactEngine e(c);
    std::mt19937_64 g(3);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<std::uint64_t> ids(c.count);
        std::iota(ids.begin(), ids.end(), 0);
        shuffle(ids, g);
        ids.resize(8);
        CHECK(alpha_stability(ids, e.table) == oracle::alpha(ids, e.table.nn1));
    }
}

TEST_CASE("alpha_stability rejects empty sets and foreign ids") {
    ExactEngine e(oracle::random_unit(10, 4, 1));
    CHECK_THROWS_AS(alpha_stability({}, e.table), ParameterError);
    CHECK_THROWS_AS(alpha_stability({3, 99}, e.table), ParameterError);
}

TEST_CASE("isolated tight cluster scores alpha = 1") {
    // a neighborhood that covers a whole isolated cluster is perfectly
    // stable: every member's nearest neighbor is another member
    const std::size_t k = 12;
    VectorCollection c;
    c.dim = 8;
    c.metric = Metric::cosine;
    GaussianStream z(5);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < 8; ++j)
            c.data.push_back(static_cast<float>((j == 0 ? 50.0 : 0.0) + z.next()));
        ++c.count;
    }
    for (std::size_t i = 0; i < 30; ++i) {
        for (std::size_t j = 0; j < 8; ++j)
            c.data.push_back(static_cast<float>((j == 1 ? -80.0 : 0.0) + 40.0 * z.next()));
        ++c.count;
    }
    c = normalize(std::move(c));
    ExactEngine e(c);
    std::vector<float> q(8, 0.0f);
    q[0] = 1.0f;
    CHECK(nsm_naive(q, e.index, k, 1).alpha() == 1.0);
    CHECK(nsm_fast(q, e.index, e.table, k, 1).alpha() == 1.0);
}

TEST_CASE("radius bounds are enforced") {
    ExactEngine e(oracle::random_unit(50, 4, 9));
    const std::vector<float> q = {1, 0, 0, 0};
    CHECK_THROWS_AS(nsm_naive(q, e.index, 50, 1), ParameterError);
    CHECK_THROWS_AS(nsm_naive(q, e.index, 0, 1), ParameterError);
    CHECK_THROWS_AS(nsm_fast(q, e.index, e.table, 53, 1), ParameterError);
    CHECK(nsm_naive(q, e.index, 49, 1).k == 49);
}

TEST_CASE("naive and fast forms agree in exact mode") {
    ExactEngine e(oracle::random_unit(5000, 16, 301));
    const VectorCollection queries = oracle::random_unit(25, 16, 302);
    for (std::size_t i = 0; i < queries.count; ++i) {
        const std::span<const float> q{queries.row(i), queries.dim};
        for (const std::size_t k : {1u, 7u, 64u}) {
            const NsmScore naive = nsm_naive(q, e.index, k, 1);
            const NsmScore fast = nsm_fast(q, e.index, e.table, k, 1);
            CHECK(naive.hits == fast.hits);
            CHECK(naive.k == fast.k);
        }
    }
}

TEST_CASE("alpha lies on the exact 1/k grid") {
    ExactEngine e(oracle::random_unit(800, 8, 401));
    const VectorCollection queries = oracle::random_unit(40, 8, 402);
    std::mt19937_64 g(403);
    for (std::size_t i = 0; i < queries.count; ++i) {
        const std::size_t k = 1 + uniform_index(g, 256);
        const NsmScore s =
            nsm_fast({queries.row(i), 8}, e.index, e.table, k, 1);
        CHECK(s.k == k);
        CHECK(s.hits <= s.k);
        const double a = s.alpha();
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
        const auto m = static_cast<std::uint64_t>(std::llround(a * s.k));
        CHECK(a == static_cast<double>(m) / static_cast<double>(s.k));
    }
}

TEST_CASE("nsm_grid equals per-k nsm_fast") {
    ExactEngine e(oracle::random_unit(1500, 12, 501));
    const VectorCollection queries = oracle::random_unit(10, 12, 502);
    const std::vector<std::size_t> grid = {1, 2, 5, 17, 64, 256, 700};
    for (std::size_t i = 0; i < queries.count; ++i) {
        const auto scores =
            nsm_grid({queries.row(i), 12}, e.index, e.table, grid, 1);
        REQUIRE(scores.size() == grid.size());
        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            const NsmScore direct =
                nsm_fast({queries.row(i), 12}, e.index, e.table, grid[gi], 1);
            CHECK(scores[gi].k == grid[gi]);
            CHECK(scores[gi].hits == direct.hits);
        }
    }
}

TEST_CASE("nsm_grid also matches under partial probing") {
    const VectorCollection c = oracle::random_unit(2000, 8, 503);
    const IvfIndex index = build_index(c, 50, 1);
    const NeighborTable table = batch_nn1(index, 50);
    const VectorCollection queries = oracle::random_unit(5, 8, 504);
    const std::vector<std::size_t> grid = {2, 8, 32};
    for (std::size_t i = 0; i < queries.count; ++i) {
        const auto scores = nsm_grid({queries.row(i), 8}, index, table, grid, 8);
        for (std::size_t gi = 0; gi < grid.size(); ++gi)
            CHECK(scores[gi].hits ==
                  nsm_fast({queries.row(i), 8}, index, table, grid[gi], 8).hits);
    }
}

TEST_CASE("score_queries preserves order and matches single calls") {
    ExactEngine e(oracle::random_unit(600, 6, 601));
    LabeledQuerySet qs;
    qs.vectors = oracle::random_unit(9, 6, 602);
    for (int i = 0; i < 9; ++i) qs.labels.push_back("q" + std::to_string(i));

    const auto batch = score_queries(qs, e.index, e.table, 20, 1);
    REQUIRE(batch.size() == 9);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        CHECK(batch[i].label == qs.labels[i]);
        const NsmScore single =
            nsm_fast({qs.vectors.row(i), 6}, e.index, e.table, 20, 1);
        CHECK(batch[i].hits == single.hits);
    }

    const LabeledQuerySet empty;
    CHECK(score_queries(empty, e.index, e.table, 20, 1).empty());
}

TEST_CASE("score_queries attaches the offending label to errors") {
    ExactEngine e(oracle::random_unit(30, 6, 603));
    LabeledQuerySet qs;
    qs.vectors = oracle::random_unit(2, 6, 604);
    qs.labels = {"alpha", "bravo"};
    try {
        score_queries(qs, e.index, e.table, 30, 1);  // k == count
        FAIL("expected an error");
    } catch (const Error& err) {
        const std::string msg = err.what();
        CHECK(msg.find("query '") != std::string::npos);
    }
}

TEST_CASE("scores round-trip through the TSV format") {
    std::vector<NsmScore> scores = {{"beach", 3, 10}, {"thing", 0, 10}, {"sky", 10, 10}};
    const auto dir = std::filesystem::temp_directory_path() / "nsm_nsm_tests";
    std::filesystem::create_directories(dir);
    const std::string p = (dir / "scores.tsv").string();
    save_scores(scores, p);
    const auto back = load_scores(p);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].label == scores[i].label);
        CHECK(back[i].hits == scores[i].hits);
        CHECK(back[i].k == scores[i].k);
    }
}

TEST_CASE("separability: a tight cluster center beats a background point") {
    // sharper regions must outscore diffuse ones; checked over 100 seeds
    int ok = 0;
    const int seeds = 100;
    for (int s = 0; s < seeds; ++s) {
        MixtureSpec spec;
        spec.dim = 8;
        spec.seed = 1000 + s;
        spec.metric = Metric::cosine;
        ClusterSpec cl;
        cl.center.assign(8, 0.0f);
        cl.center[0] = 1.0f;
        cl.sigma = 0.01;
        cl.size = 50;
        spec.clusters.push_back(cl);
        spec.background_count = 200;
        spec.background_extent = 1.0;
        const GeneratedData data = generate(spec);
        ExactEngine e(data.collection);
        const std::size_t k = 32;  // no larger than the cluster size
        const NsmScore at_center =
            nsm_fast({data.queries.vectors.row(0), 8}, e.index, e.table, k, 1);
        // a background probe direction far from the cluster axis
        std::vector<float> probe(8, 0.0f);
        probe[1] = -1.0f;
        const NsmScore at_background =
            nsm_fast(probe, e.index, e.table, k, 1);
        if (at_center.alpha() > at_background.alpha()) ++ok;
    }
    CHECK(ok >= 99);
}

TEST_CASE("duplicating a stable isolated neighborhood keeps alpha at 1") {
    const std::size_t m = 8;
    VectorCollection c;
    c.dim = 6;
    c.metric = Metric::cosine;
    GaussianStream z(71);
    // tight isolated cluster (ids 0..m-1)
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < 6; ++j)
            c.data.push_back(static_cast<float>((j == 0 ? 100.0 : 0.0) + z.next()));
        ++c.count;
    }
    // diffuse far-away background so the collection is bigger than 2m
    for (std::size_t i = 0; i < 40; ++i) {
        for (std::size_t j = 0; j < 6; ++j)
            c.data.push_back(static_cast<float>((j == 1 ? -80.0 : 0.0) + 40.0 * z.next()));
        ++c.count;
    }
    c = normalize(std::move(c));

    std::vector<float> q(6, 0.0f);
    q[0] = 1.0f;
    {
        ExactEngine e(c);
        CHECK(nsm_fast(q, e.index, e.table, m, 1).alpha() == 1.0);
    }

    // duplicate the cluster rows at fresh ids; the whole duplicated
    // neighborhood (k = 2m) is still perfectly stable
    VectorCollection dup = c;
    for (std::size_t i = 0; i < m; ++i) {
        const float* r = c.row(i);
        dup.data.insert(dup.data.end(), r, r + 6);
        ++dup.count;
    }
    ExactEngine e2(dup);
    CHECK(nsm_fast(q, e2.index, e2.table, 2 * m, 1).alpha() == 1.0);
}
