#pragma once

// Precomputed nearest-neighbor table: nn1[u] = id of u's nearest neighbor in
// the same collection, with u itself excluded.  Shared between the index
// layer (which builds it) and the scoring layer (which looks it up).
//
// Snapshot format (little-endian):
//   [8-byte magic "NSMTAB01"][uint64 count][count x uint64 nn1]

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "nsm/error.hpp"

namespace nsm {

struct NeighborTable {
    std::vector<std::uint64_t> nn1;

    std::size_t size() const { return nn1.size(); }
};

namespace detail {
constexpr char kTabMagic[8] = {'N', 'S', 'M', 'T', 'A', 'B', '0', '1'};
}

inline void save_table(const NeighborTable& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    const std::uint64_t count = t.nn1.size();
    out.write(detail::kTabMagic, sizeof(detail::kTabMagic));
    out.write(reinterpret_cast<const char*>(&count), 8);
    out.write(reinterpret_cast<const char*>(t.nn1.data()),
              static_cast<std::streamsize>(count * 8));
    if (!out) throw FormatError("short write to '" + path + "'");
}

inline NeighborTable load_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    char magic[8];
    std::uint64_t count = 0;
    if (!in.read(magic, 8) || std::memcmp(magic, detail::kTabMagic, 8) != 0)
        throw FormatError("'" + path + "': bad neighbor-table magic");
    if (!in.read(reinterpret_cast<char*>(&count), 8))
        throw FormatError("'" + path + "': truncated header");
    NeighborTable t;
    t.nn1.resize(count);
    if (!in.read(reinterpret_cast<char*>(t.nn1.data()),
                 static_cast<std::streamsize>(count * 8)))
        throw FormatError("'" + path + "': truncated table body");
    if (in.peek() != std::ifstream::traits_type::eof())
        throw FormatError("'" + path + "': trailing bytes after table");
    for (std::uint64_t u = 0; u < count; ++u) {
        if (t.nn1[u] >= count)
            throw DataError("'" + path + "': nn1[" + std::to_string(u) +
                            "] out of range");
        if (t.nn1[u] == u)
            throw DataError("'" + path + "': nn1[" + std::to_string(u) +
                            "] is self-referential");
    }
    return t;
}

}  // namespace nsm
