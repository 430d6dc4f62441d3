#pragma once

// Statistical evaluation: Spearman correlation against human ratings under
// a seeded split-and-trial protocol, radius tuning on a validation split,
// ROC-AUC threshold classification, and margin filtering.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "nsm/error.hpp"
#include "nsm/nsm.hpp"
#include "nsm/rng.hpp"
#include "nsm/vecstore.hpp"

namespace nsm {

struct RatingEntry {
    std::string label;
    double rating;
};

struct RatingsTable {
    std::vector<RatingEntry> entries;
};

struct SplitSpec {
    std::uint64_t seed = 0;
    double validation_fraction = 0.20;
    std::size_t trials = 10;
};

struct EvalReport {
    std::vector<double> trial_rho;      // test-set Spearman per trial
    std::vector<std::size_t> trial_k;   // tuned radius per trial (empty if fixed)
    double mean_rho = 0.0;
    double coverage = 0.0;              // scored rated labels / rated labels
};

// ---------------------------------------------------------------------------
// rank statistics

// 1-based fractional ranks; tied values share the average of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return v[a] < v[b] || (v[a] == v[b] && a < b);
    });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw ParameterError("correlation inputs differ in length (" +
                             std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()) + ")");
    const std::size_t n = x.size();
    if (n < 2)
        throw UndefinedCorrelationError("correlation needs at least 2 pairs");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw UndefinedCorrelationError("correlation undefined for a constant list");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Spearman's rho: Pearson correlation of fractional ranks.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw ParameterError("spearman inputs differ in length (" +
                             std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()) + ")");
    return pearson(average_ranks(x), average_ranks(y));
}

// Mann-Whitney AUC: probability a random positive outscores a random
// negative, ties counted 0.5.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ParameterError("auc inputs differ in length");
    std::size_t npos = 0, nneg = 0;
    for (const int l : labels) {
        if (l == 1)
            ++npos;
        else if (l == 0)
            ++nneg;
        else
            throw ParameterError("auc labels must be 0 or 1");
    }
    if (npos == 0 || nneg == 0)
        throw DegenerateLabelsError("auc needs both classes present");
    const std::vector<double> ranks = average_ranks(scores);
    double pos_rank_sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (labels[i] == 1) pos_rank_sum += ranks[i];
    const double np = static_cast<double>(npos);
    const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(nneg));
}

// ---------------------------------------------------------------------------
// ratings and thresholding

inline RatingsTable load_ratings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line))
        throw FormatError("'" + path + "': missing header line");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "label\trating")
        throw FormatError("'" + path + "': expected header 'label<TAB>rating'");
    RatingsTable t;
    std::unordered_set<std::string> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto parts = detail::split(line, '\t');
        if (parts.size() != 2)
            throw FormatError("'" + path + "' line " + std::to_string(line_no) +
                              ": expected label<TAB>rating");
        double rating = 0.0;
        const auto res = std::from_chars(parts[1].data(),
                                         parts[1].data() + parts[1].size(), rating);
        if (res.ec != std::errc{} || res.ptr != parts[1].data() + parts[1].size())
            throw FormatError("'" + path + "' line " + std::to_string(line_no) +
                              ": bad rating '" + parts[1] + "'");
        if (!std::isfinite(rating))
            throw DataError("'" + path + "' line " + std::to_string(line_no) +
                            ": non-finite rating");
        if (!seen.insert(fold_case(parts[0])).second)
            throw DataError("'" + path + "' line " + std::to_string(line_no) +
                            ": duplicate label '" + parts[0] + "' (case-folded)");
        t.entries.push_back({parts[0], rating});
    }
    return t;
}

inline void save_ratings(const RatingsTable& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "label\trating\n";
    char buf[48];
    for (const RatingEntry& e : t.entries) {
        std::snprintf(buf, sizeof(buf), "%.12g", e.rating);
        out << e.label << '\t' << buf << '\n';
    }
    if (!out) throw FormatError("short write to '" + path + "'");
}

// 1 iff rating > theta (strictly); equality goes to the negative class.
inline std::vector<int> threshold_labels(const RatingsTable& ratings, double theta) {
    if (!std::isfinite(theta)) throw ParameterError("theta must be finite");
    std::vector<int> labels;
    labels.reserve(ratings.entries.size());
    for (const RatingEntry& e : ratings.entries)
        labels.push_back(e.rating > theta ? 1 : 0);
    return labels;
}

// Retains scores with alpha <= omega or alpha >= 1 - omega (the open
// interval (omega, 1-omega) is excluded; omega = 0.5 keeps everything).
inline std::vector<NsmScore> margin_filter(const std::vector<NsmScore>& scores,
                                           double omega) {
    if (!(omega > 0.0) || !(omega <= 0.5))
        throw ParameterError("omega must lie in (0, 0.5]");
    std::vector<NsmScore> kept;
    for (const NsmScore& s : scores) {
        const double a = s.alpha();
        if (a <= omega || a >= 1.0 - omega) kept.push_back(s);
    }
    return kept;
}

// ---------------------------------------------------------------------------
// split-and-trial protocol

struct SplitSets {
    std::unordered_set<std::string> validation;  // case-folded labels
    std::unordered_set<std::string> test;
};

// Deterministic 20/80-style split of the rated vocabulary for one trial.
// The trial seed is split.seed + trial_index.  Labels are canonically
// ordered before shuffling so the split is independent of file order.
inline SplitSets split_labels(const RatingsTable& ratings, const SplitSpec& split,
                              std::size_t trial) {
    if (!(split.validation_fraction > 0.0) || !(split.validation_fraction < 1.0))
        throw ParameterError("validation fraction must lie in (0, 1)");
    std::vector<std::string> labels;
    labels.reserve(ratings.entries.size());
    for (const RatingEntry& e : ratings.entries) labels.push_back(fold_case(e.label));
    std::sort(labels.begin(), labels.end());
    std::mt19937_64 gen(split.seed + trial);
    shuffle(labels, gen);
    const std::size_t n = labels.size();
    std::size_t n_val = static_cast<std::size_t>(
        std::llround(split.validation_fraction * static_cast<double>(n)));
    n_val = std::clamp<std::size_t>(n_val, 1, n > 1 ? n - 1 : 1);
    SplitSets sets;
    for (std::size_t i = 0; i < n; ++i)
        (i < n_val ? sets.validation : sets.test).insert(labels[i]);
    return sets;
}

namespace detail {

inline std::unordered_map<std::string, double> score_map(
    const std::vector<std::pair<std::string, double>>& scores) {
    std::unordered_map<std::string, double> m;
    m.reserve(scores.size());
    for (const auto& [label, value] : scores) m.emplace(fold_case(label), value);
    return m;
}

// rho over the rated labels in `subset` that have a score
inline double subset_spearman(const RatingsTable& ratings,
                              const std::unordered_map<std::string, double>& scores,
                              const std::unordered_set<std::string>& subset) {
    std::vector<double> r, s;
    for (const RatingEntry& e : ratings.entries) {
        const std::string key = fold_case(e.label);
        if (!subset.count(key)) continue;
        const auto it = scores.find(key);
        if (it == scores.end()) continue;
        r.push_back(e.rating);
        s.push_back(it->second);
    }
    return spearman(r, s);
}

}  // namespace detail

// Fixed-score evaluation: joins scores to ratings by case-folded label and
// reports per-trial test-set Spearman plus coverage.  Rated labels without
// a score lower coverage but are excluded from rho.
inline EvalReport evaluate(const std::vector<std::pair<std::string, double>>& scores,
                           const RatingsTable& ratings, const SplitSpec& split) {
    if (ratings.entries.empty()) throw NoCoverageError("ratings table is empty");
    if (split.trials < 1) throw ParameterError("trials must be >= 1");
    const auto smap = detail::score_map(scores);
    std::size_t matched = 0;
    for (const RatingEntry& e : ratings.entries)
        if (smap.count(fold_case(e.label))) ++matched;
    if (matched == 0)
        throw NoCoverageError("no rated label has a score");

    EvalReport report;
    report.coverage = static_cast<double>(matched) /
                      static_cast<double>(ratings.entries.size());
    for (std::size_t t = 0; t < split.trials; ++t) {
        const SplitSets sets = split_labels(ratings, split, t);
        report.trial_rho.push_back(detail::subset_spearman(ratings, smap, sets.test));
    }
    report.mean_rho = std::accumulate(report.trial_rho.begin(), report.trial_rho.end(),
                                      0.0) /
                      static_cast<double>(report.trial_rho.size());
    return report;
}

inline EvalReport evaluate(const std::vector<NsmScore>& scores,
                           const RatingsTable& ratings, const SplitSpec& split) {
    std::vector<std::pair<std::string, double>> pairs;
    pairs.reserve(scores.size());
    for (const NsmScore& s : scores) pairs.emplace_back(s.label, s.alpha());
    return evaluate(pairs, ratings, split);
}

// Sweeps the radius grid: per trial, picks the k with the best validation
// rho (smallest k on ties) and reports the test rho at that k.  Candidates
// whose scores are constant on the validation split are skipped.
inline std::pair<std::vector<std::size_t>, EvalReport> tune_radius(
    const LabeledQuerySet& queries, const RatingsTable& ratings,
    const IvfIndex& index, const NeighborTable& table,
    const std::vector<std::size_t>& grid, const SplitSpec& split,
    std::size_t nprobe = kDefaultNprobe) {
    if (grid.empty()) throw ParameterError("radius grid is empty");
    if (split.trials < 1) throw ParameterError("trials must be >= 1");
    std::vector<std::size_t> ks(grid);
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    for (const std::size_t k : ks)
        if (k < 1 || k >= index.source->count)
            throw ParameterError("grid radius k=" + std::to_string(k) +
                                 " outside [1, count-1]");

    // Score every query at every grid radius (single search per query).
    const std::size_t nq = queries.labels.size();
    std::vector<std::vector<NsmScore>> grid_scores(nq);
    parallel_for(nq, [&](std::size_t i) {
        const float* q = queries.vectors.row(i);
        grid_scores[i] = nsm_grid({q, queries.vectors.dim}, index, table, ks, nprobe);
    });

    // Join with ratings once; per-grid score maps for the trials.
    std::vector<std::unordered_map<std::string, double>> per_k(ks.size());
    for (std::size_t gi = 0; gi < ks.size(); ++gi) {
        per_k[gi].reserve(nq);
        for (std::size_t i = 0; i < nq; ++i)
            per_k[gi].emplace(fold_case(queries.labels[i]),
                              grid_scores[i][gi].alpha());
    }
    std::size_t matched = 0;
    for (const RatingEntry& e : ratings.entries)
        if (per_k[0].count(fold_case(e.label))) ++matched;
    if (matched == 0) throw NoCoverageError("no rated label has a scored query");

    EvalReport report;
    report.coverage = static_cast<double>(matched) /
                      static_cast<double>(ratings.entries.size());
    std::vector<std::size_t> best_ks;
    for (std::size_t t = 0; t < split.trials; ++t) {
        const SplitSets sets = split_labels(ratings, split, t);
        std::size_t best_gi = ks.size();
        double best_rho = 0.0;
        for (std::size_t gi = 0; gi < ks.size(); ++gi) {
            double rho;
            try {
                rho = detail::subset_spearman(ratings, per_k[gi], sets.validation);
            } catch (const UndefinedCorrelationError&) {
                continue;  // constant scores at this radius
            }
            if (best_gi == ks.size() || rho > best_rho) {
                best_gi = gi;
                best_rho = rho;
            }
        }
        if (best_gi == ks.size())
            throw UndefinedCorrelationError(
                "trial " + std::to_string(t) +
                ": validation split has no usable radius (constant scores or "
                "fewer than 2 distinct ratings)");
        best_ks.push_back(ks[best_gi]);
        report.trial_k.push_back(ks[best_gi]);
        report.trial_rho.push_back(
            detail::subset_spearman(ratings, per_k[best_gi], sets.test));
    }
    report.mean_rho = std::accumulate(report.trial_rho.begin(), report.trial_rho.end(),
                                      0.0) /
                      static_cast<double>(report.trial_rho.size());
    return {best_ks, report};
}

// ---------------------------------------------------------------------------
// report output

inline void write_report(const EvalReport& r, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "trial\tk\trho\n";
    char buf[48];
    for (std::size_t t = 0; t < r.trial_rho.size(); ++t) {
        std::snprintf(buf, sizeof(buf), "%.12f", r.trial_rho[t]);
        out << t << '\t';
        if (t < r.trial_k.size())
            out << r.trial_k[t];
        else
            out << '-';
        out << '\t' << buf << '\n';
    }
    std::snprintf(buf, sizeof(buf), "%.12f", r.mean_rho);
    out << "mean\t-\t" << buf << '\n';
    std::snprintf(buf, sizeof(buf), "%.12f", r.coverage);
    out << "coverage\t-\t" << buf << '\n';
    if (!out) throw FormatError("short write to '" + path + "'");
}

struct AucRow {
    double theta;
    double auc;     // meaningful only when defined
    bool defined;   // false when a class is empty at this theta
};

// One `theta<TAB>auc` table; undefined rows carry the marker value "nan".
inline void write_auc_table(const std::vector<AucRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "theta\tauc\n";
    char buf[48];
    for (const AucRow& row : rows) {
        std::snprintf(buf, sizeof(buf), "%.12g", row.theta);
        out << buf << '\t';
        if (row.defined) {
            std::snprintf(buf, sizeof(buf), "%.12f", row.auc);
            out << buf;
        } else {
            out << "nan";
        }
        out << '\n';
    }
    if (!out) throw FormatError("short write to '" + path + "'");
}

}  // namespace nsm
