#pragma once

// Neighborhood Stability Measure.
//
// The alpha-stability of a point set P is the fraction of members whose
// nearest neighbor (self excluded) also lies in P.  The NSM of a query q at
// radius k is the alpha-stability of q's k-nearest-neighbor set.  Two
// equivalent evaluation paths are provided: the naive one issues a fresh
// 1-NN query per member, the fast one looks the neighbor up in a
// precomputed table.  Alpha is kept as an integer pair (hits, k) so the
// quantization grid {0, 1/k, ..., 1} is exact by construction.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "nsm/ann.hpp"
#include "nsm/error.hpp"
#include "nsm/neighbor_table.hpp"
#include "nsm/parallel.hpp"
#include "nsm/vecstore.hpp"

namespace nsm {

struct NsmScore {
    std::string label;
    std::uint64_t hits = 0;
    std::uint64_t k = 0;

    double alpha() const { return static_cast<double>(hits) / static_cast<double>(k); }
};

// |{u in P : nn1[u] in P}|
inline std::uint64_t stable_hits(const std::vector<std::uint64_t>& members,
                                 const NeighborTable& table) {
    std::unordered_set<std::uint64_t> in_set(members.begin(), members.end());
    std::uint64_t hits = 0;
    for (const std::uint64_t u : members) {
        if (u >= table.size())
            throw ParameterError("member id " + std::to_string(u) +
                                 " outside neighbor table of size " +
                                 std::to_string(table.size()));
        if (in_set.count(table.nn1[u])) ++hits;
    }
    return hits;
}

inline double alpha_stability(const std::vector<std::uint64_t>& members,
                              const NeighborTable& table) {
    if (members.empty())
        throw ParameterError("alpha-stability of an empty member set is undefined");
    return static_cast<double>(stable_hits(members, table)) /
           static_cast<double>(members.size());
}

namespace detail {

inline void check_nsm_args(const IvfIndex& index, std::span<const float> q,
                           std::size_t k) {
    const VectorCollection& c = *index.source;
    if (q.size() != c.dim)
        throw ParameterError("query dim " + std::to_string(q.size()) +
                             " != index dim " + std::to_string(c.dim));
    if (k < 1 || k >= c.count)
        throw ParameterError("radius k=" + std::to_string(k) +
                             " outside [1, count-1=" + std::to_string(c.count - 1) +
                             "]");
}

// 1-NN of collection point u, self excluded, probing nprobe lists (all of
// them when nprobe = nlist, which makes the lookup exact).
inline std::uint64_t point_nn1(const IvfIndex& index, std::uint64_t u,
                               std::size_t nprobe) {
    const VectorCollection& c = *index.source;
    const std::size_t d = c.dim;
    const float* qu = c.row(u);
    Candidate best{0.0, 0};
    bool have = false;
    if (nprobe >= index.nlist) {
        for (std::size_t i = 0; i < c.count; ++i) {
            if (i == u) continue;
            const Candidate cand{dot(qu, c.row(i), d), i};
            if (!have || better(cand, best)) {
                best = cand;
                have = true;
            }
        }
        return best.id;
    }
    std::vector<Candidate> order(index.nlist);
    for (std::size_t l = 0; l < index.nlist; ++l)
        order[l] = {dot(qu, index.centroids.row(l), d), l};
    std::sort(order.begin(), order.end(), better);
    for (std::size_t p = 0; p < index.nlist; ++p) {
        if (p >= nprobe && have) break;
        for (const std::uint64_t id : index.postings[order[p].id]) {
            if (id == u) continue;
            const Candidate cand{dot(qu, c.row(id), d), id};
            if (!have || better(cand, best)) {
                best = cand;
                have = true;
            }
        }
    }
    return best.id;
}

}  // namespace detail

// Algorithm as written: one k-NN search for q, then a fresh 1-NN query per
// member.  O(k * T) where T is the per-query search cost.
inline NsmScore nsm_naive(std::span<const float> q, const IvfIndex& index,
                          std::size_t k, std::size_t nprobe = kDefaultNprobe) {
    detail::check_nsm_args(index, q, k);
    nprobe = std::max<std::size_t>(1, std::min(nprobe, index.nlist));
    const KnnResult nk = search(index, q, k, nprobe);
    std::unordered_set<std::uint64_t> in_set(nk.ids.begin(), nk.ids.end());
    std::uint64_t hits = 0;
    for (const std::uint64_t u : nk.ids)
        if (in_set.count(detail::point_nn1(index, u, nprobe))) ++hits;
    return {"", hits, k};
}

// Table-lookup form: one k-NN search, then O(1) lookups.  Identical to
// nsm_naive whenever the table was built with the same neighbor
// configuration (always in exact mode).
inline NsmScore nsm_fast(std::span<const float> q, const IvfIndex& index,
                         const NeighborTable& table, std::size_t k,
                         std::size_t nprobe = kDefaultNprobe) {
    detail::check_nsm_args(index, q, k);
    if (table.size() != index.source->count)
        throw ParameterError("neighbor table size " + std::to_string(table.size()) +
                             " != collection count " +
                             std::to_string(index.source->count));
    const KnnResult nk = search(index, q, k, nprobe);
    return {"", stable_hits(nk.ids, table), k};
}

// NSM at every radius in ks (ascending, deduplicated by the caller) from a
// single search at the largest radius.  Under the strict total order the
// top-k set is the k-prefix of the top-k_max list, so for member v_i with
// table entry t_i the pair (q, k) scores a hit iff max(i, pos(t_i)) < k.
// Counting those thresholds into a histogram gives every hits(k) in one
// O(k_max) pass.  Requires a k-independent candidate pool (lists are never
// extended beyond nprobe for k <= k_max), which holds whenever the probed
// lists hold at least k_max points - always true in exact mode.
inline std::vector<NsmScore> nsm_grid(std::span<const float> q, const IvfIndex& index,
                                      const NeighborTable& table,
                                      const std::vector<std::size_t>& ks,
                                      std::size_t nprobe = kDefaultNprobe) {
    if (ks.empty()) throw ParameterError("radius grid is empty");
    if (!std::is_sorted(ks.begin(), ks.end()) ||
        std::adjacent_find(ks.begin(), ks.end()) != ks.end())
        throw ParameterError("radius grid must be strictly increasing");
    const std::size_t kmax = ks.back();
    detail::check_nsm_args(index, q, kmax);
    if (table.size() != index.source->count)
        throw ParameterError("neighbor table size " + std::to_string(table.size()) +
                             " != collection count " +
                             std::to_string(index.source->count));

    const KnnResult nk = search(index, q, kmax, nprobe);
    std::unordered_map<std::uint64_t, std::size_t> pos;
    pos.reserve(nk.ids.size());
    for (std::size_t i = 0; i < nk.ids.size(); ++i) pos.emplace(nk.ids[i], i);

    // hist[m] = number of members that become hits once k exceeds m
    std::vector<std::uint64_t> hist(kmax, 0);
    for (std::size_t i = 0; i < nk.ids.size(); ++i) {
        const auto it = pos.find(table.nn1[nk.ids[i]]);
        if (it == pos.end()) continue;  // neighbor outside the k_max list
        const std::size_t m = std::max(i, it->second);
        if (m < kmax) ++hist[m];
    }
    std::vector<NsmScore> out;
    out.reserve(ks.size());
    std::uint64_t running = 0;
    std::size_t gi = 0;
    for (std::size_t k = 1; k <= kmax && gi < ks.size(); ++k) {
        running += hist[k - 1];
        if (k == ks[gi]) {
            out.push_back({"", running, k});
            ++gi;
        }
    }
    return out;
}

// Batch driver: one NsmScore per query label, in input order.
inline std::vector<NsmScore> score_queries(const LabeledQuerySet& queries,
                                           const IvfIndex& index,
                                           const NeighborTable& table, std::size_t k,
                                           std::size_t nprobe = kDefaultNprobe) {
    if (queries.vectors.count > 0 && queries.vectors.dim != index.source->dim)
        throw ParameterError("query dim " + std::to_string(queries.vectors.dim) +
                             " != index dim " + std::to_string(index.source->dim));
    std::vector<NsmScore> out(queries.labels.size());
    parallel_for(queries.labels.size(), [&](std::size_t i) {
        try {
            const float* q = queries.vectors.row(i);
            NsmScore s = nsm_fast({q, queries.vectors.dim}, index, table, k, nprobe);
            s.label = queries.labels[i];
            out[i] = std::move(s);
        } catch (const Error& e) {
            throw DataError("query '" + queries.labels[i] + "': " + e.what());
        }
    });
    return out;
}

inline void save_scores(const std::vector<NsmScore>& scores, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "label\talpha\thits\tk\n";
    char buf[32];
    for (const NsmScore& s : scores) {
        std::snprintf(buf, sizeof(buf), "%.6f", s.alpha());
        out << s.label << '\t' << buf << '\t' << s.hits << '\t' << s.k << '\n';
    }
    if (!out) throw FormatError("short write to '" + path + "'");
}

inline std::vector<NsmScore> load_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line))
        throw FormatError("'" + path + "': missing header line");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "label\talpha\thits\tk")
        throw FormatError("'" + path + "': unexpected score header '" + line + "'");
    std::vector<NsmScore> scores;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto parts = detail::split(line, '\t');
        if (parts.size() != 4)
            throw FormatError("'" + path + "' line " + std::to_string(line_no) +
                              ": expected 4 fields");
        NsmScore s;
        s.label = parts[0];
        try {
            s.hits = std::stoull(parts[2]);
            s.k = std::stoull(parts[3]);
        } catch (const std::exception&) {
            throw FormatError("'" + path + "' line " + std::to_string(line_no) +
                              ": bad integer field");
        }
        if (s.k == 0 || s.hits > s.k)
            throw DataError("'" + path + "' line " + std::to_string(line_no) +
                            ": hits/k out of range");
        scores.push_back(std::move(s));
    }
    return scores;
}

}  // namespace nsm
