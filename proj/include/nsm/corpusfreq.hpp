#pragma once

// Word-frequency baseline: count token occurrences in a caption corpus and
// use the raw count of a label as its prediction.
//
// Tokenizer rule: a token is a maximal run of ASCII alphanumerics
// [A-Za-z0-9], case-folded; every other codepoint (including all non-ASCII)
// separates tokens.  Simple, deterministic, and documented - the reference
// experiments never pin a tokenizer.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nsm/error.hpp"
#include "nsm/vecstore.hpp"

namespace nsm {

struct FrequencyTable {
    std::unordered_map<std::string, std::uint64_t> counts;  // case-folded token
    std::uint64_t total_tokens = 0;
};

namespace detail {

// Structural UTF-8 validation (leading-byte patterns, continuation counts,
// overlong forms, surrogates, > U+10FFFF).
inline bool valid_utf8(const std::string& s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char b = static_cast<unsigned char>(s[i]);
        std::size_t len;
        std::uint32_t cp;
        if (b < 0x80) {
            ++i;
            continue;
        } else if ((b & 0xE0) == 0xC0) {
            len = 2;
            cp = b & 0x1F;
        } else if ((b & 0xF0) == 0xE0) {
            len = 3;
            cp = b & 0x0F;
        } else if ((b & 0xF8) == 0xF0) {
            len = 4;
            cp = b & 0x07;
        } else {
            return false;
        }
        if (i + len > s.size()) return false;
        for (std::size_t j = 1; j < len; ++j) {
            const unsigned char c = static_cast<unsigned char>(s[i + j]);
            if ((c & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (c & 0x3F);
        }
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
            (len == 4 && cp < 0x10000))
            return false;  // overlong
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
        i += len;
    }
    return true;
}

inline bool token_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

}  // namespace detail

// Tokenizes one line into the running table.
inline void count_line(FrequencyTable& t, const std::string& line) {
    std::string tok;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        const char c = i < line.size() ? line[i] : ' ';
        if (detail::token_char(c)) {
            tok.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
        } else if (!tok.empty()) {
            ++t.counts[tok];
            ++t.total_tokens;
            tok.clear();
        }
    }
}

inline FrequencyTable count_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    FrequencyTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!detail::valid_utf8(line))
            throw DataError("'" + path + "' line " + std::to_string(line_no) +
                            ": invalid UTF-8");
        count_line(t, line);
    }
    return t;
}

// Raw count per label (0 when absent); labels are case-folded before lookup.
inline std::vector<double> freq_scores(const FrequencyTable& table,
                                       const std::vector<std::string>& labels) {
    std::vector<double> out;
    out.reserve(labels.size());
    for (const std::string& label : labels) {
        const auto it = table.counts.find(fold_case(label));
        out.push_back(it == table.counts.end()
                          ? 0.0
                          : static_cast<double>(it->second));
    }
    return out;
}

inline void save_frequency_table(const FrequencyTable& t, const std::string& path) {
    std::vector<std::pair<std::string, std::uint64_t>> rows(t.counts.begin(),
                                                            t.counts.end());
    std::sort(rows.begin(), rows.end());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "token\tcount\n";
    for (const auto& [token, count] : rows)
        out << token << '\t' << count << '\n';
    if (!out) throw FormatError("short write to '" + path + "'");
}

}  // namespace nsm
