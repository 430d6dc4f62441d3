#pragma once

// Dense vector collections and labeled query sets: disk formats, validation,
// normalization.
//
// Supported collection formats (all little-endian):
//   fvecs   - repeated [int32 dim][dim x float32] records
//   raw-f32 - [magic "NSMVEC01"][uint32 dim][uint64 count][dim*count float32]
// Query sets are UTF-8 TSV: header "label" (optionally "label<TAB>dim"),
// then one "label<TAB>f1,f2,..." row per query.

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "nsm/error.hpp"
#include "nsm/kernels.hpp"

namespace nsm {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts are unsupported");

enum class Metric { cosine, inner_product };

inline Metric metric_from_string(const std::string& s) {
    if (s == "cosine") return Metric::cosine;
    if (s == "ip" || s == "inner-product") return Metric::inner_product;
    throw ParameterError("unknown metric '" + s + "' (expected 'cosine' or 'ip')");
}

inline const char* to_string(Metric m) {
    return m == Metric::cosine ? "cosine" : "ip";
}

enum class FileFormat { fvecs, raw_f32 };

inline FileFormat format_from_string(const std::string& s) {
    if (s == "fvecs") return FileFormat::fvecs;
    if (s == "raw" || s == "raw-f32") return FileFormat::raw_f32;
    throw ParameterError("unknown format '" + s + "' (expected 'fvecs' or 'raw')");
}

// Guesses the on-disk format from the file extension (.fvecs vs anything else).
inline FileFormat format_from_path(const std::string& path) {
    const auto pos = path.rfind('.');
    if (pos != std::string::npos && path.substr(pos) == ".fvecs")
        return FileFormat::fvecs;
    return FileFormat::raw_f32;
}

struct VectorCollection {
    std::size_t dim = 0;
    std::size_t count = 0;
    std::vector<float> data;  // row-major, dim * count
    Metric metric = Metric::cosine;
    bool normalized = false;

    const float* row(std::size_t i) const { return data.data() + i * dim; }
    float* row(std::size_t i) { return data.data() + i * dim; }
};

struct LabeledQuerySet {
    std::vector<std::string> labels;
    VectorCollection vectors;
};

// ASCII case-fold; labels are compared and deduplicated in this form.
inline std::string fold_case(std::string s) {
    for (char& c : s)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return s;
}

namespace detail {

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    return bytes;
}

inline void check_finite(const VectorCollection& c, const std::string& path) {
    for (std::size_t i = 0; i < c.data.size(); ++i)
        if (!std::isfinite(c.data[i]))
            throw DataError("'" + path + "': non-finite component in row " +
                            std::to_string(i / c.dim));
}

constexpr std::size_t kMaxDim = 1u << 20;
constexpr char kVecMagic[8] = {'N', 'S', 'M', 'V', 'E', 'C', '0', '1'};

}  // namespace detail

inline VectorCollection load_collection(const std::string& path, FileFormat format) {
    const std::string bytes = detail::read_file_bytes(path);
    VectorCollection c;

    if (format == FileFormat::fvecs) {
        std::size_t off = 0;
        while (off < bytes.size()) {
            if (bytes.size() - off < 4)
                throw FormatError("'" + path + "': truncated fvecs record header");
            std::int32_t d = 0;
            std::memcpy(&d, bytes.data() + off, 4);
            off += 4;
            if (d <= 0 || static_cast<std::size_t>(d) > detail::kMaxDim)
                throw FormatError("'" + path + "': implausible fvecs dim " +
                                  std::to_string(d));
            if (c.count == 0) {
                c.dim = static_cast<std::size_t>(d);
            } else if (static_cast<std::size_t>(d) != c.dim) {
                throw FormatError("'" + path + "': row " + std::to_string(c.count) +
                                  " declares dim " + std::to_string(d) + " but dim " +
                                  std::to_string(c.dim) + " was established");
            }
            const std::size_t payload = c.dim * sizeof(float);
            if (bytes.size() - off < payload)
                throw FormatError("'" + path + "': truncated fvecs record body");
            const std::size_t pos = c.data.size();
            c.data.resize(pos + c.dim);
            std::memcpy(c.data.data() + pos, bytes.data() + off, payload);
            off += payload;
            ++c.count;
        }
    } else {
        if (bytes.size() < sizeof(detail::kVecMagic) + 4 + 8)
            throw FormatError("'" + path + "': file too small for raw-f32 header");
        if (std::memcmp(bytes.data(), detail::kVecMagic, sizeof(detail::kVecMagic)) != 0)
            throw FormatError("'" + path + "': bad raw-f32 magic");
        std::uint32_t dim = 0;
        std::uint64_t count = 0;
        std::memcpy(&dim, bytes.data() + 8, 4);
        std::memcpy(&count, bytes.data() + 12, 8);
        if (dim == 0 || dim > detail::kMaxDim)
            throw FormatError("'" + path + "': implausible dim " + std::to_string(dim));
        const std::size_t header = sizeof(detail::kVecMagic) + 4 + 8;
        const std::size_t payload = static_cast<std::size_t>(dim) * count * sizeof(float);
        if (bytes.size() != header + payload)
            throw FormatError("'" + path + "': size mismatch (expected " +
                              std::to_string(header + payload) + " bytes, got " +
                              std::to_string(bytes.size()) + ")");
        c.dim = dim;
        c.count = count;
        c.data.resize(static_cast<std::size_t>(dim) * count);
        std::memcpy(c.data.data(), bytes.data() + header, payload);
    }

    if (c.count == 0) throw EmptyCollectionError("'" + path + "': no vectors");
    detail::check_finite(c, path);
    return c;
}

inline void save_collection(const VectorCollection& c, const std::string& path,
                            FileFormat format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    if (format == FileFormat::fvecs) {
        const std::int32_t d = static_cast<std::int32_t>(c.dim);
        for (std::size_t i = 0; i < c.count; ++i) {
            out.write(reinterpret_cast<const char*>(&d), 4);
            out.write(reinterpret_cast<const char*>(c.row(i)),
                      static_cast<std::streamsize>(c.dim * sizeof(float)));
        }
    } else {
        const std::uint32_t dim = static_cast<std::uint32_t>(c.dim);
        const std::uint64_t count = c.count;
        out.write(detail::kVecMagic, sizeof(detail::kVecMagic));
        out.write(reinterpret_cast<const char*>(&dim), 4);
        out.write(reinterpret_cast<const char*>(&count), 8);
        out.write(reinterpret_cast<const char*>(c.data.data()),
                  static_cast<std::streamsize>(c.data.size() * sizeof(float)));
    }
    if (!out) throw FormatError("short write to '" + path + "'");
}

// Scales every row to unit L2 norm and sets the normalized flag.  Already
// normalized input is returned unchanged, which makes the operation
// bitwise-idempotent.
inline VectorCollection normalize(VectorCollection c) {
    if (c.normalized) return c;
    for (std::size_t i = 0; i < c.count; ++i) {
        float* r = c.row(i);
        const double n = std::sqrt(norm_sq(r, c.dim));
        if (n == 0.0)
            throw DegenerateVectorError("zero-norm row " + std::to_string(i) +
                                        " cannot be normalized");
        const double inv = 1.0 / n;
        for (std::size_t j = 0; j < c.dim; ++j)
            r[j] = static_cast<float>(r[j] * inv);
    }
    c.normalized = true;
    return c;
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

inline float parse_float(const std::string& tok, const std::string& path,
                         std::size_t line_no) {
    float v = 0.0f;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw FormatError("'" + path + "' line " + std::to_string(line_no) +
                          ": bad float '" + tok + "'");
    return v;
}

}  // namespace detail

inline LabeledQuerySet load_queries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line))
        throw FormatError("'" + path + "': missing header line");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split(line, '\t');
    if (header.empty() || header[0] != "label")
        throw FormatError("'" + path + "': header must start with 'label'");
    std::size_t declared_dim = 0;  // 0 = take dim from the first record
    if (header.size() >= 2 && !header[1].empty()) {
        const auto res = std::from_chars(header[1].data(),
                                         header[1].data() + header[1].size(),
                                         declared_dim);
        if (res.ec != std::errc{} || declared_dim == 0)
            throw FormatError("'" + path + "': bad dim field '" + header[1] +
                              "' in header");
    }

    LabeledQuerySet qs;
    std::unordered_set<std::string> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw FormatError("'" + path + "' line " + std::to_string(line_no) +
                              ": expected label<TAB>values");
        std::string label = line.substr(0, tab);
        if (!seen.insert(fold_case(label)).second)
            throw DataError("'" + path + "' line " + std::to_string(line_no) +
                            ": duplicate label '" + label + "' (case-folded)");
        const auto toks = detail::split(line.substr(tab + 1), ',');
        if (declared_dim == 0) declared_dim = toks.size();
        if (toks.size() != declared_dim)
            throw FormatError("'" + path + "' line " + std::to_string(line_no) +
                              ": expected " + std::to_string(declared_dim) +
                              " values, got " + std::to_string(toks.size()));
        for (const auto& t : toks)
            qs.vectors.data.push_back(detail::parse_float(t, path, line_no));
        qs.labels.push_back(std::move(label));
    }

    qs.vectors.dim = declared_dim;
    qs.vectors.count = qs.labels.size();
    if (qs.vectors.count > 0)
        detail::check_finite(qs.vectors, path);
    return qs;
}

inline void save_queries(const LabeledQuerySet& qs, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "label\t" << qs.vectors.dim << "\n";
    char buf[64];
    for (std::size_t i = 0; i < qs.labels.size(); ++i) {
        out << qs.labels[i] << '\t';
        const float* r = qs.vectors.row(i);
        for (std::size_t j = 0; j < qs.vectors.dim; ++j) {
            // shortest representation that round-trips binary32 exactly
            const auto res = std::to_chars(buf, buf + sizeof(buf), r[j]);
            if (j) out << ',';
            out.write(buf, res.ptr - buf);
        }
        out << '\n';
    }
    if (!out) throw FormatError("short write to '" + path + "'");
}

}  // namespace nsm
