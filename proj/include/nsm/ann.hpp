#pragma once

// Inverted-file (IVF) approximate nearest neighbor index with an exact
// flat-scan mode.
//
// Similarity is the collection metric delta: inner product, which equals
// cosine similarity over normalized vectors.  The total order used
// everywhere is (higher similarity, then lower id), so results are fully
// deterministic; with nprobe = nlist the search visits every point exactly
// once (partition invariant) and therefore coincides with the exact scan.
//
// Snapshot format (little-endian):
//   [8-byte magic "NSMIVF01"][uint32 dim][uint32 nlist][uint64 count]
//   [nlist*dim float32 centroids][per list: uint64 length + uint64 ids]

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "nsm/error.hpp"
#include "nsm/kernels.hpp"
#include "nsm/neighbor_table.hpp"
#include "nsm/parallel.hpp"
#include "nsm/rng.hpp"
#include "nsm/vecstore.hpp"

namespace nsm {

inline constexpr std::size_t kDefaultNprobe = 128;
inline constexpr unsigned kKmeansIterations = 25;

// Default list count, 8*sqrt(n) rounded up, clamped so nlist <= count.
inline std::size_t default_nlist(std::size_t count) {
    const auto root = static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(count))));
    return std::max<std::size_t>(1, std::min(count, 8 * root));
}

struct Candidate {
    double score;
    std::uint64_t id;
};

// The strict total order used for every ranking decision in this library.
inline bool better(const Candidate& a, const Candidate& b) {
    return a.score > b.score || (a.score == b.score && a.id < b.id);
}

struct KnnResult {
    std::vector<std::uint64_t> ids;  // best first
    std::vector<double> scores;      // non-increasing, parallel to ids
};

// Bounded selection of the k best candidates under better().  Backed by a
// heap whose root is the worst retained element.
class TopK {
public:
    explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

    void push(Candidate c) {
        if (heap_.size() < k_) {
            heap_.push_back(c);
            std::push_heap(heap_.begin(), heap_.end(), better);
        } else if (better(c, heap_.front())) {
            std::pop_heap(heap_.begin(), heap_.end(), better);
            heap_.back() = c;
            std::push_heap(heap_.begin(), heap_.end(), better);
        }
    }

    std::size_t size() const { return heap_.size(); }

    KnnResult take() {
        std::sort_heap(heap_.begin(), heap_.end(), better);  // best first
        KnnResult r;
        r.ids.reserve(heap_.size());
        r.scores.reserve(heap_.size());
        for (const Candidate& c : heap_) {
            r.ids.push_back(c.id);
            r.scores.push_back(c.score);
        }
        heap_.clear();
        return r;
    }

private:
    std::size_t k_;
    std::vector<Candidate> heap_;
};

struct IvfIndex {
    VectorCollection centroids;                      // count == nlist
    std::vector<std::vector<std::uint64_t>> postings;
    std::size_t nlist = 0;
    const VectorCollection* source = nullptr;
    bool trained = false;
};

namespace detail {

constexpr char kIvfMagic[8] = {'N', 'S', 'M', 'I', 'V', 'F', '0', '1'};

// Nearest centroid per point under delta with the (score desc, id asc)
// tie-break.  Writes per-point slots only, so the parallel partition cannot
// affect the result.  Points are processed in tiles so a centroid row is
// reused across the whole tile while it is hot in cache.
inline void assign_points(const VectorCollection& c, const VectorCollection& cents,
                          std::vector<std::uint32_t>& best,
                          std::vector<double>& best_sim) {
    const std::size_t n = c.count;
    const std::size_t nlist = cents.count;
    const std::size_t d = c.dim;
    constexpr std::size_t kTile = 64;
    best.assign(n, 0);
    best_sim.assign(n, 0.0);
    const std::size_t tiles = (n + kTile - 1) / kTile;
    parallel_for(tiles, [&](std::size_t t) {
        const std::size_t lo = t * kTile;
        const std::size_t hi = std::min(n, lo + kTile);
        for (std::size_t i = lo; i < hi; ++i)
            best_sim[i] = dot(c.row(i), cents.row(0), d);
        for (std::size_t l = 1; l < nlist; ++l) {
            const float* cent = cents.row(l);
            for (std::size_t i = lo; i < hi; ++i) {
                const double s = dot(c.row(i), cent, d);
                if (s > best_sim[i]) {  // strict: ties keep the lower list id
                    best_sim[i] = s;
                    best[i] = static_cast<std::uint32_t>(l);
                }
            }
        }
    });
}

// k-means++ seeding by squared L2 distance (equals 2 - 2*delta on unit
// vectors).  Deterministic: all draws come from the caller's generator.
inline VectorCollection seed_centroids(const VectorCollection& c, std::size_t nlist,
                                       std::mt19937_64& gen) {
    const std::size_t n = c.count;
    const std::size_t d = c.dim;
    std::vector<double> nsq(n);
    for (std::size_t i = 0; i < n; ++i) nsq[i] = norm_sq(c.row(i), d);

    VectorCollection cents;
    cents.dim = d;
    cents.metric = c.metric;
    cents.normalized = c.normalized;
    cents.data.reserve(nlist * d);

    std::vector<double> mind(n);
    auto add_center = [&](std::size_t id) {
        const float* r = c.row(id);
        cents.data.insert(cents.data.end(), r, r + d);
        ++cents.count;
    };
    auto update_mind = [&](std::size_t center_id, bool first) {
        const float* cr = c.row(center_id);
        const double cn = nsq[center_id];
        parallel_for(n, [&](std::size_t i) {
            const double dist = std::max(0.0, nsq[i] + cn - 2.0 * dot(c.row(i), cr, d));
            if (first || dist < mind[i]) mind[i] = dist;
        });
    };

    const std::size_t first_id = uniform_index(gen, n);
    add_center(first_id);
    update_mind(first_id, true);

    while (cents.count < nlist) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += mind[i];
        std::size_t chosen;
        if (total > 0.0) {
            const double r = uniform01(gen) * total;
            double cum = 0.0;
            chosen = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                cum += mind[i];
                if (cum > r) {
                    chosen = i;
                    break;
                }
            }
        } else {
            // all mass on existing centers (duplicate-heavy data)
            chosen = uniform_index(gen, n);
        }
        add_center(chosen);
        update_mind(chosen, false);
    }
    return cents;
}

}  // namespace detail

// k-means (k-means++ seeding, fixed Lloyd budget, deterministic under seed),
// then one posting list per centroid.
inline IvfIndex build_index(const VectorCollection& c, std::size_t nlist,
                            std::uint64_t seed) {
    if (c.count == 0) throw EmptyCollectionError("cannot index an empty collection");
    if (nlist < 1 || nlist > c.count)
        throw ParameterError("nlist " + std::to_string(nlist) +
                             " outside [1, count=" + std::to_string(c.count) + "]");
    if (c.metric == Metric::cosine && !c.normalized)
        throw ParameterError("cosine collections must be normalized before indexing");

    const std::size_t n = c.count;
    const std::size_t d = c.dim;
    std::mt19937_64 gen(derive_stream_seed(seed, 0));

    IvfIndex index;
    index.centroids = detail::seed_centroids(c, nlist, gen);
    index.nlist = nlist;
    index.source = &c;

    std::vector<std::uint32_t> assign;
    std::vector<double> sim;
    detail::assign_points(c, index.centroids, assign, sim);

    std::vector<double> sums(nlist * d);
    std::vector<std::uint64_t> sizes(nlist);
    std::vector<char> claimed(n);
    for (unsigned iter = 0; iter < kKmeansIterations; ++iter) {
        // update: plain means, accumulated in id order for determinism
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(sizes.begin(), sizes.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            double* s = sums.data() + assign[i] * d;
            const float* r = c.row(i);
            for (std::size_t j = 0; j < d; ++j) s[j] += r[j];
            ++sizes[assign[i]];
        }
        std::vector<std::size_t> empty;
        for (std::size_t l = 0; l < nlist; ++l) {
            if (sizes[l] == 0) {
                empty.push_back(l);
                continue;
            }
            float* cent = index.centroids.row(l);
            const double inv = 1.0 / static_cast<double>(sizes[l]);
            for (std::size_t j = 0; j < d; ++j)
                cent[j] = static_cast<float>(sums[l * d + j] * inv);
            if (c.metric == Metric::cosine) {
                const double norm = std::sqrt(norm_sq(cent, d));
                if (norm == 0.0) {
                    empty.push_back(l);  // antipodal cancellation
                } else {
                    const double inv_norm = 1.0 / norm;
                    for (std::size_t j = 0; j < d; ++j)
                        cent[j] = static_cast<float>(cent[j] * inv_norm);
                }
            }
        }
        // re-seed empty lists from the points least similar to their own
        // centroid (one point each, lowest id on ties)
        if (!empty.empty()) {
            std::sort(empty.begin(), empty.end());
            std::fill(claimed.begin(), claimed.end(), 0);
            for (const std::size_t l : empty) {
                std::size_t far = n;
                for (std::size_t i = 0; i < n; ++i) {
                    if (claimed[i]) continue;
                    if (far == n || sim[i] < sim[far]) far = i;
                }
                if (far == n) break;  // fewer points than empty lists
                claimed[far] = 1;
                const float* r = c.row(far);
                std::copy(r, r + d, index.centroids.row(l));
            }
        }
        detail::assign_points(c, index.centroids, assign, sim);
    }

    index.postings.assign(nlist, {});
    for (std::size_t i = 0; i < n; ++i)
        index.postings[assign[i]].push_back(i);
    index.trained = true;
    return index;
}

inline IvfIndex build_index(const VectorCollection& c, std::uint64_t seed) {
    return build_index(c, default_nlist(c.count), seed);
}

// Exhaustive scan; the reference top-k under the library's total order.
inline KnnResult exact_search(const VectorCollection& c, std::span<const float> q,
                              std::size_t k) {
    if (q.size() != c.dim)
        throw ParameterError("query dim " + std::to_string(q.size()) +
                             " != collection dim " + std::to_string(c.dim));
    if (k < 1) throw ParameterError("k must be >= 1");
    TopK top(std::min(k, c.count));
    for (std::size_t i = 0; i < c.count; ++i)
        top.push({dot(q.data(), c.row(i), c.dim), i});
    return top.take();
}

// Scans the nprobe posting lists whose centroids are most similar to q.
// If those lists hold fewer than min(k, count) points, further lists are
// probed in centroid-rank order so the result always has full length.
inline KnnResult search(const IvfIndex& index, std::span<const float> q,
                        std::size_t k, std::size_t nprobe = kDefaultNprobe) {
    const VectorCollection& c = *index.source;
    if (q.size() != c.dim)
        throw ParameterError("query dim " + std::to_string(q.size()) +
                             " != index dim " + std::to_string(c.dim));
    if (k < 1) throw ParameterError("k must be >= 1");
    nprobe = std::max<std::size_t>(1, std::min(nprobe, index.nlist));

    std::vector<Candidate> order(index.nlist);
    for (std::size_t l = 0; l < index.nlist; ++l)
        order[l] = {dot(q.data(), index.centroids.row(l), c.dim), l};
    std::sort(order.begin(), order.end(), better);

    const std::size_t want = std::min(k, c.count);
    TopK top(want);
    std::size_t seen = 0;
    for (std::size_t p = 0; p < index.nlist; ++p) {
        if (p >= nprobe && seen >= want) break;
        for (const std::uint64_t id : index.postings[order[p].id]) {
            top.push({dot(q.data(), c.row(id), c.dim), id});
            ++seen;
        }
    }
    return top.take();
}

// table[u] = u's nearest neighbor (self excluded) via the index, probing
// nprobe lists per point.  Parallel over points; output is partition-free.
inline NeighborTable batch_nn1(const IvfIndex& index,
                               std::size_t nprobe = kDefaultNprobe) {
    const VectorCollection& c = *index.source;
    if (!index.trained) throw ParameterError("index is not trained");
    if (c.count < 2)
        throw CollectionTooSmallError("batch_nn1 needs at least 2 points");
    const std::size_t d = c.dim;
    nprobe = std::max<std::size_t>(1, std::min(nprobe, index.nlist));

    NeighborTable t;
    t.nn1.assign(c.count, 0);

    if (nprobe == index.nlist) {
        // exact mode: flat scan per point, self excluded
        parallel_for(c.count, [&](std::size_t u) {
            const float* qu = c.row(u);
            Candidate best{0.0, 0};
            bool have = false;
            for (std::size_t i = 0; i < c.count; ++i) {
                if (i == u) continue;
                const Candidate cand{dot(qu, c.row(i), d), i};
                if (!have || better(cand, best)) {
                    best = cand;
                    have = true;
                }
            }
            t.nn1[u] = best.id;
        });
        return t;
    }

    parallel_for(c.count, [&](std::size_t u) {
        const float* qu = c.row(u);
        std::vector<Candidate> order(index.nlist);
        for (std::size_t l = 0; l < index.nlist; ++l)
            order[l] = {dot(qu, index.centroids.row(l), d), l};
        std::sort(order.begin(), order.end(), better);
        Candidate best{0.0, 0};
        bool have = false;
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
        t.nn1[u] = best.id;
    });
    return t;
}

inline void save_index(const IvfIndex& index, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    const std::uint32_t dim = static_cast<std::uint32_t>(index.centroids.dim);
    const std::uint32_t nlist = static_cast<std::uint32_t>(index.nlist);
    const std::uint64_t count = index.source ? index.source->count : 0;
    out.write(detail::kIvfMagic, sizeof(detail::kIvfMagic));
    out.write(reinterpret_cast<const char*>(&dim), 4);
    out.write(reinterpret_cast<const char*>(&nlist), 4);
    out.write(reinterpret_cast<const char*>(&count), 8);
    out.write(reinterpret_cast<const char*>(index.centroids.data.data()),
              static_cast<std::streamsize>(index.centroids.data.size() * sizeof(float)));
    for (const auto& list : index.postings) {
        const std::uint64_t len = list.size();
        out.write(reinterpret_cast<const char*>(&len), 8);
        out.write(reinterpret_cast<const char*>(list.data()),
                  static_cast<std::streamsize>(len * 8));
    }
    if (!out) throw FormatError("short write to '" + path + "'");
}

inline IvfIndex load_index(const std::string& path, const VectorCollection& source) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    char magic[8];
    std::uint32_t dim = 0, nlist = 0;
    std::uint64_t count = 0;
    if (!in.read(magic, 8) || std::memcmp(magic, detail::kIvfMagic, 8) != 0)
        throw FormatError("'" + path + "': bad index magic");
    if (!in.read(reinterpret_cast<char*>(&dim), 4) ||
        !in.read(reinterpret_cast<char*>(&nlist), 4) ||
        !in.read(reinterpret_cast<char*>(&count), 8))
        throw FormatError("'" + path + "': truncated header");
    if (dim != source.dim)
        throw DataError("'" + path + "': index dim " + std::to_string(dim) +
                        " != collection dim " + std::to_string(source.dim));
    if (count != source.count)
        throw DataError("'" + path + "': index count " + std::to_string(count) +
                        " != collection count " + std::to_string(source.count));
    if (nlist == 0 || nlist > count)
        throw FormatError("'" + path + "': implausible nlist " + std::to_string(nlist));

    IvfIndex index;
    index.nlist = nlist;
    index.source = &source;
    index.centroids.dim = dim;
    index.centroids.count = nlist;
    index.centroids.metric = source.metric;
    index.centroids.normalized = source.normalized;
    index.centroids.data.resize(static_cast<std::size_t>(dim) * nlist);
    if (!in.read(reinterpret_cast<char*>(index.centroids.data.data()),
                 static_cast<std::streamsize>(index.centroids.data.size() * sizeof(float))))
        throw FormatError("'" + path + "': truncated centroids");

    std::vector<char> seen(count, 0);
    std::uint64_t total = 0;
    index.postings.resize(nlist);
    for (std::uint32_t l = 0; l < nlist; ++l) {
        std::uint64_t len = 0;
        if (!in.read(reinterpret_cast<char*>(&len), 8))
            throw FormatError("'" + path + "': truncated posting header");
        if (len > count - total)
            throw FormatError("'" + path + "': posting lists exceed count");
        index.postings[l].resize(len);
        if (!in.read(reinterpret_cast<char*>(index.postings[l].data()),
                     static_cast<std::streamsize>(len * 8)))
            throw FormatError("'" + path + "': truncated posting list");
        for (const std::uint64_t id : index.postings[l]) {
            if (id >= count)
                throw DataError("'" + path + "': point id " + std::to_string(id) +
                                " out of range");
            if (seen[id]++)
                throw DataError("'" + path + "': point id " + std::to_string(id) +
                                " appears in more than one posting list");
        }
        total += len;
    }
    if (total != count)
        throw DataError("'" + path + "': posting lists cover " + std::to_string(total) +
                        " of " + std::to_string(count) + " points");
    if (in.peek() != std::ifstream::traits_type::eof())
        throw FormatError("'" + path + "': trailing bytes after postings");
    index.trained = true;
    return index;
}

}  // namespace nsm
