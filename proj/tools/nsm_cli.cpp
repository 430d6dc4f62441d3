// Subcommand front door for the NSM toolkit: generate synthetic mixtures,
// build IVF indexes and neighbor tables, score queries, and run the
// rating-correlation / AUC evaluation pipelines.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nsm/ann.hpp"
#include "nsm/corpusfreq.hpp"
#include "nsm/error.hpp"
#include "nsm/evalstats.hpp"
#include "nsm/nsm.hpp"
#include "nsm/synthgen.hpp"
#include "nsm/vecstore.hpp"

namespace {

// "lo:hi:step" -> {lo, lo+step, ..., <=hi}
std::vector<std::size_t> parse_k_grid(const std::string& s) {
    unsigned long long lo = 0, hi = 0, step = 0;
    if (std::sscanf(s.c_str(), "%llu:%llu:%llu", &lo, &hi, &step) != 3 || step == 0 ||
        lo == 0 || hi < lo)
        throw nsm::ParameterError("bad k grid '" + s + "' (expected lo:hi:step)");
    std::vector<std::size_t> grid;
    for (unsigned long long k = lo; k <= hi; k += step) grid.push_back(k);
    return grid;
}

std::vector<double> parse_theta_grid(const std::string& s) {
    double lo = 0, hi = 0, step = 0;
    if (std::sscanf(s.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || !(step > 0) ||
        hi < lo)
        throw nsm::ParameterError("bad theta grid '" + s + "' (expected lo:hi:step)");
    std::vector<double> grid;
    for (double t = lo; t <= hi + 1e-9 * step; t += step) grid.push_back(t);
    return grid;
}

// evenly spaced interior default when no --theta-grid is given
std::vector<double> default_theta_grid(const nsm::RatingsTable& ratings) {
    double lo = ratings.entries.front().rating, hi = lo;
    for (const auto& e : ratings.entries) {
        lo = std::min(lo, e.rating);
        hi = std::max(hi, e.rating);
    }
    std::vector<double> grid;
    const int steps = 21;
    for (int i = 0; i < steps; ++i)
        grid.push_back(lo + (hi - lo) * (i + 0.5) / steps);
    return grid;
}

struct IoOpts {
    std::string collection;
    std::string format;  // empty = by extension
    std::string metric = "cosine";
};

nsm::VectorCollection load_prepared(const IoOpts& io) {
    const nsm::FileFormat fmt = io.format.empty() ? nsm::format_from_path(io.collection)
                                                  : nsm::format_from_string(io.format);
    nsm::VectorCollection c = nsm::load_collection(io.collection, fmt);
    c.metric = nsm::metric_from_string(io.metric);
    if (c.metric == nsm::Metric::cosine) c = nsm::normalize(std::move(c));
    return c;
}

nsm::LabeledQuerySet load_prepared_queries(const std::string& path, nsm::Metric metric) {
    nsm::LabeledQuerySet qs = nsm::load_queries(path);
    qs.vectors.metric = metric;
    if (metric == nsm::Metric::cosine && qs.vectors.count > 0)
        qs.vectors = nsm::normalize(std::move(qs.vectors));
    return qs;
}

// Loads the index + table when paths are given, builds them otherwise.
struct Engine {
    nsm::IvfIndex index;
    nsm::NeighborTable table;
};

Engine make_engine(const nsm::VectorCollection& c, const std::string& index_path,
                   const std::string& table_path, std::size_t nlist,
                   std::size_t nprobe, std::uint64_t seed) {
    Engine e;
    if (!index_path.empty())
        e.index = nsm::load_index(index_path, c);
    else
        e.index = nsm::build_index(c, nlist ? nlist : nsm::default_nlist(c.count), seed);
    if (!table_path.empty())
        e.table = nsm::load_table(table_path);
    else
        e.table = nsm::batch_nn1(e.index, nprobe);
    if (e.table.size() != c.count)
        throw nsm::DataError("neighbor table size does not match the collection");
    return e;
}

void print_report(const nsm::EvalReport& r) {
    std::printf("trials        %zu\n", r.trial_rho.size());
    std::printf("mean test rho %.6f\n", r.mean_rho);
    std::printf("coverage      %.1f%%\n", 100.0 * r.coverage);
    for (std::size_t t = 0; t < r.trial_rho.size(); ++t) {
        if (t < r.trial_k.size())
            std::printf("trial %zu: k=%zu rho=%.6f\n", t, r.trial_k[t], r.trial_rho[t]);
        else
            std::printf("trial %zu: rho=%.6f\n", t, r.trial_rho[t]);
    }
}

std::string omega_table_path(const std::string& base, double omega) {
    char tag[32];
    std::snprintf(tag, sizeof(tag), ".omega%g", omega);
    const auto pos = base.rfind('.');
    if (pos == std::string::npos || base.find('/', pos) != std::string::npos)
        return base + tag;
    return base.substr(0, pos) + tag + base.substr(pos);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"neighborhood stability measure (NSM) toolkit"};
    app.require_subcommand(1);

    // ---- synth ----------------------------------------------------------
    struct {
        std::size_t dim = 32, clusters = 40, cluster_size = 1250, background = 10000;
        double sigma_min = 0.01, sigma_max = 0.7, extent = 1.0;
        std::string metric = "cosine", out;
        std::uint64_t seed = 0;
    } syn;
    CLI::App* synth = app.add_subcommand("synth", "generate a rated Gaussian mixture");
    synth->add_option("--dim", syn.dim, "vector dimensionality");
    synth->add_option("--clusters", syn.clusters, "number of Gaussian clusters");
    synth->add_option("--cluster-size", syn.cluster_size, "points per cluster");
    synth->add_option("--sigma-min", syn.sigma_min, "smallest cluster sigma");
    synth->add_option("--sigma-max", syn.sigma_max, "largest cluster sigma");
    synth->add_option("--background", syn.background, "uniform background points");
    synth->add_option("--extent", syn.extent, "background/center half-extent");
    synth->add_option("--metric", syn.metric, "cosine or ip");
    synth->add_option("--seed", syn.seed, "generator seed");
    synth->add_option("--out", syn.out, "output prefix")->required();
    synth->callback([&] {
        const nsm::MixtureSpec spec = nsm::make_geometric_spec(
            syn.dim, syn.clusters, syn.cluster_size, syn.sigma_min, syn.sigma_max,
            syn.background, syn.extent, syn.seed,
            nsm::metric_from_string(syn.metric));
        const nsm::GeneratedData data = nsm::generate(spec);
        nsm::save_collection(data.collection, syn.out + ".vec",
                             nsm::FileFormat::raw_f32);
        nsm::save_queries(data.queries, syn.out + ".queries.tsv");
        nsm::save_ratings(data.ratings, syn.out + ".ratings.tsv");
    });

    // ---- build ----------------------------------------------------------
    struct {
        IoOpts io;
        std::size_t nlist = 0, nprobe = nsm::kDefaultNprobe;
        std::uint64_t seed = 0;
        std::string out;
    } bld;
    CLI::App* build = app.add_subcommand("build", "build IVF index + neighbor table");
    build->add_option("--collection", bld.io.collection, "vector file")->required();
    build->add_option("--format", bld.io.format, "fvecs or raw (default: by extension)");
    build->add_option("--metric", bld.io.metric, "cosine or ip");
    build->add_option("--nlist", bld.nlist, "cluster count (0 = 8*ceil(sqrt(n)))");
    build->add_option("--nprobe", bld.nprobe, "probed lists for the neighbor table");
    build->add_option("--seed", bld.seed, "k-means seed");
    build->add_option("--out", bld.out, "output prefix")->required();
    build->callback([&] {
        const nsm::VectorCollection c = load_prepared(bld.io);
        const nsm::IvfIndex index = nsm::build_index(
            c, bld.nlist ? bld.nlist : nsm::default_nlist(c.count), bld.seed);
        const nsm::NeighborTable table = nsm::batch_nn1(index, bld.nprobe);
        nsm::save_index(index, bld.out + ".ivf");
        nsm::save_table(table, bld.out + ".nn1");
    });

    // ---- score ----------------------------------------------------------
    struct {
        IoOpts io;
        std::string index, table, queries, out;
        std::size_t k = 0, nprobe = nsm::kDefaultNprobe, nlist = 0;
        std::uint64_t seed = 0;
    } sco;
    CLI::App* score = app.add_subcommand("score", "NSM scores for a query set");
    score->add_option("--collection", sco.io.collection, "vector file")->required();
    score->add_option("--format", sco.io.format, "fvecs or raw");
    score->add_option("--metric", sco.io.metric, "cosine or ip");
    score->add_option("--index", sco.index, "index snapshot (built if omitted)");
    score->add_option("--table", sco.table, "neighbor table (built if omitted)");
    score->add_option("--queries", sco.queries, "query TSV")->required();
    score->add_option("--k", sco.k, "neighborhood radius")->required();
    score->add_option("--nprobe", sco.nprobe, "probed lists per search");
    score->add_option("--nlist", sco.nlist, "cluster count when building");
    score->add_option("--seed", sco.seed, "k-means seed when building");
    score->add_option("--out", sco.out, "score TSV")->required();
    score->callback([&] {
        const nsm::VectorCollection c = load_prepared(sco.io);
        const Engine e = make_engine(c, sco.index, sco.table, sco.nlist, sco.nprobe,
                                     sco.seed);
        const nsm::LabeledQuerySet qs = load_prepared_queries(sco.queries, c.metric);
        const auto scores = nsm::score_queries(qs, e.index, e.table, sco.k, sco.nprobe);
        nsm::save_scores(scores, sco.out);
    });

    // ---- eval -----------------------------------------------------------
    struct {
        IoOpts io;
        std::string scores, index, table, queries, ratings, k_grid = "64:4096:64", out;
        std::size_t nprobe = nsm::kDefaultNprobe, nlist = 0, trials = 10;
        double val_frac = 0.20;
        std::uint64_t seed = 0;
    } evl;
    CLI::App* eval = app.add_subcommand(
        "eval", "split-and-trial Spearman evaluation (precomputed scores or pipeline)");
    eval->add_option("--scores", evl.scores, "score TSV (skips the scoring pipeline)");
    eval->add_option("--collection", evl.io.collection, "vector file (pipeline mode)");
    eval->add_option("--format", evl.io.format, "fvecs or raw");
    eval->add_option("--metric", evl.io.metric, "cosine or ip");
    eval->add_option("--index", evl.index, "index snapshot (built if omitted)");
    eval->add_option("--table", evl.table, "neighbor table (built if omitted)");
    eval->add_option("--queries", evl.queries, "query TSV (pipeline mode)");
    eval->add_option("--ratings", evl.ratings, "ratings TSV")->required();
    eval->add_option("--k-grid", evl.k_grid, "radius grid lo:hi:step");
    eval->add_option("--nprobe", evl.nprobe, "probed lists per search");
    eval->add_option("--nlist", evl.nlist, "cluster count when building");
    eval->add_option("--seed", evl.seed, "split/build seed");
    eval->add_option("--trials", evl.trials, "number of trials");
    eval->add_option("--val-frac", evl.val_frac, "validation fraction");
    eval->add_option("--out", evl.out, "report TSV")->required();
    eval->callback([&] {
        const nsm::RatingsTable ratings = nsm::load_ratings(evl.ratings);
        const nsm::SplitSpec split{evl.seed, evl.val_frac, evl.trials};
        nsm::EvalReport report;
        if (!evl.scores.empty()) {
            report = nsm::evaluate(nsm::load_scores(evl.scores), ratings, split);
        } else {
            if (evl.io.collection.empty() || evl.queries.empty())
                throw nsm::ParameterError(
                    "eval needs either --scores or --collection + --queries");
            const nsm::VectorCollection c = load_prepared(evl.io);
            const Engine e = make_engine(c, evl.index, evl.table, evl.nlist,
                                         evl.nprobe, evl.seed);
            const nsm::LabeledQuerySet qs =
                load_prepared_queries(evl.queries, c.metric);
            report = nsm::tune_radius(qs, ratings, e.index, e.table,
                                      parse_k_grid(evl.k_grid), split, evl.nprobe)
                         .second;
        }
        nsm::write_report(report, evl.out);
        print_report(report);
    });

    // ---- sweep ----------------------------------------------------------
    struct {
        IoOpts io;
        std::string index, table, queries, ratings, k_grid = "64:4096:64", out;
        std::size_t nprobe = nsm::kDefaultNprobe, nlist = 0;
        std::uint64_t seed = 0;
    } swp;
    CLI::App* sweep = app.add_subcommand(
        "sweep", "radius-vs-rho table over the full rated set (no split)");
    sweep->add_option("--collection", swp.io.collection, "vector file")->required();
    sweep->add_option("--format", swp.io.format, "fvecs or raw");
    sweep->add_option("--metric", swp.io.metric, "cosine or ip");
    sweep->add_option("--index", swp.index, "index snapshot (built if omitted)");
    sweep->add_option("--table", swp.table, "neighbor table (built if omitted)");
    sweep->add_option("--queries", swp.queries, "query TSV")->required();
    sweep->add_option("--ratings", swp.ratings, "ratings TSV")->required();
    sweep->add_option("--k-grid", swp.k_grid, "radius grid lo:hi:step");
    sweep->add_option("--nprobe", swp.nprobe, "probed lists per search");
    sweep->add_option("--nlist", swp.nlist, "cluster count when building");
    sweep->add_option("--seed", swp.seed, "build seed");
    sweep->add_option("--out", swp.out, "k<TAB>rho TSV")->required();
    sweep->callback([&] {
        const nsm::VectorCollection c = load_prepared(swp.io);
        const Engine e = make_engine(c, swp.index, swp.table, swp.nlist, swp.nprobe,
                                     swp.seed);
        const nsm::LabeledQuerySet qs = load_prepared_queries(swp.queries, c.metric);
        const nsm::RatingsTable ratings = nsm::load_ratings(swp.ratings);
        const std::vector<std::size_t> grid = parse_k_grid(swp.k_grid);

        std::vector<std::vector<nsm::NsmScore>> per_query(qs.labels.size());
        nsm::parallel_for(qs.labels.size(), [&](std::size_t i) {
            per_query[i] = nsm::nsm_grid({qs.vectors.row(i), qs.vectors.dim}, e.index,
                                         e.table, grid, swp.nprobe);
        });
        std::unordered_map<std::string, double> rated;
        for (const auto& entry : ratings.entries)
            rated.emplace(nsm::fold_case(entry.label), entry.rating);

        std::ofstream out(swp.out, std::ios::binary | std::ios::trunc);
        if (!out) throw nsm::FormatError("cannot open '" + swp.out + "' for writing");
        out << "k\trho\n";
        char buf[48];
        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            std::vector<double> r, s;
            for (std::size_t i = 0; i < qs.labels.size(); ++i) {
                const auto it = rated.find(nsm::fold_case(qs.labels[i]));
                if (it == rated.end()) continue;
                r.push_back(it->second);
                s.push_back(per_query[i][gi].alpha());
            }
            out << grid[gi] << '\t';
            try {
                std::snprintf(buf, sizeof(buf), "%.12f", nsm::spearman(r, s));
                out << buf;
            } catch (const nsm::UndefinedCorrelationError&) {
                out << "nan";
            }
            out << '\n';
        }
    });

    // ---- auc ------------------------------------------------------------
    struct {
        std::string scores, ratings, theta_grid, out;
        std::vector<double> omega{0.35, 0.4, 0.45, 0.5};
    } roc;
    CLI::App* aucc = app.add_subcommand(
        "auc", "threshold-classification AUC tables, one per margin omega");
    aucc->add_option("--scores", roc.scores, "score TSV")->required();
    aucc->add_option("--ratings", roc.ratings, "ratings TSV")->required();
    aucc->add_option("--theta-grid", roc.theta_grid,
                     "rating thresholds lo:hi:step (default: 21 interior steps)");
    aucc->add_option("--omega", roc.omega, "margin values (default 0.35 0.4 0.45 0.5)")
        ->expected(-1);
    aucc->add_option("--out", roc.out, "output TSV base path")->required();
    aucc->callback([&] {
        const auto scores = nsm::load_scores(roc.scores);
        const nsm::RatingsTable ratings = nsm::load_ratings(roc.ratings);
        if (ratings.entries.empty()) throw nsm::NoCoverageError("ratings table is empty");
        const std::vector<double> thetas = roc.theta_grid.empty()
                                               ? default_theta_grid(ratings)
                                               : parse_theta_grid(roc.theta_grid);
        std::unordered_map<std::string, double> rated;
        for (const auto& entry : ratings.entries)
            rated.emplace(nsm::fold_case(entry.label), entry.rating);

        for (const double omega : roc.omega) {
            const auto kept = nsm::margin_filter(scores, omega);
            std::vector<double> alpha, rating;
            for (const auto& s : kept) {
                const auto it = rated.find(nsm::fold_case(s.label));
                if (it == rated.end()) continue;
                alpha.push_back(s.alpha());
                rating.push_back(it->second);
            }
            if (alpha.empty())
                throw nsm::NoCoverageError("no rated score survives omega=" +
                                           std::to_string(omega));
            std::vector<nsm::AucRow> rows;
            for (const double theta : thetas) {
                std::vector<int> labels;
                labels.reserve(rating.size());
                for (const double r : rating) labels.push_back(r > theta ? 1 : 0);
                nsm::AucRow row{theta, 0.0, false};
                try {
                    row.auc = nsm::auc(alpha, labels);
                    row.defined = true;
                } catch (const nsm::DegenerateLabelsError&) {
                    row.defined = false;
                }
                rows.push_back(row);
            }
            nsm::write_auc_table(rows, omega_table_path(roc.out, omega));
        }
    });

    // ---- freq -----------------------------------------------------------
    struct {
        std::string corpus, ratings, out, counts_out;
        std::size_t trials = 10;
        double val_frac = 0.20;
        std::uint64_t seed = 0;
    } frq;
    CLI::App* freq = app.add_subcommand("freq", "word-frequency baseline evaluation");
    freq->add_option("--corpus", frq.corpus, "UTF-8 corpus, one caption per line")
        ->required();
    freq->add_option("--ratings", frq.ratings, "ratings TSV")->required();
    freq->add_option("--seed", frq.seed, "split seed");
    freq->add_option("--trials", frq.trials, "number of trials");
    freq->add_option("--val-frac", frq.val_frac, "validation fraction");
    freq->add_option("--counts-out", frq.counts_out, "optional token<TAB>count TSV");
    freq->add_option("--out", frq.out, "report TSV")->required();
    freq->callback([&] {
        const nsm::FrequencyTable table = nsm::count_corpus(frq.corpus);
        if (!frq.counts_out.empty()) nsm::save_frequency_table(table, frq.counts_out);
        const nsm::RatingsTable ratings = nsm::load_ratings(frq.ratings);
        std::vector<std::string> labels;
        for (const auto& e : ratings.entries) labels.push_back(e.label);
        const std::vector<double> counts = nsm::freq_scores(table, labels);
        // only labels the baseline can score at all enter the evaluation;
        // the rest lower coverage
        std::vector<std::pair<std::string, double>> preds;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (counts[i] > 0.0) preds.emplace_back(labels[i], counts[i]);
        const nsm::SplitSpec split{frq.seed, frq.val_frac, frq.trials};
        const nsm::EvalReport report = nsm::evaluate(preds, ratings, split);
        nsm::write_report(report, frq.out);
        print_report(report);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const nsm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
