#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hot/corpus.hpp"

namespace hot {

struct AnalysisError : std::invalid_argument {
    enum class Kind { MissingConceptLabel, OutOfRange, BadN, BadBinWidth };
    Kind kind;
    AnalysisError(Kind k, const std::string& msg) : std::invalid_argument(msg), kind(k) {}
};

// ---------------------------------------------------------------------------
// Venn partition over the three boolean labels
// ---------------------------------------------------------------------------

// Eight cells keyed (hateful, offensive, toxic) in canonical concept order.
struct VennPartition {
    std::array<size_t, 8> counts{};

    static size_t cell_index(bool hateful, bool offensive, bool toxic) {
        return (hateful ? 4u : 0u) | (offensive ? 2u : 0u) | (toxic ? 1u : 0u);
    }
    size_t& at(bool hateful, bool offensive, bool toxic) {
        return counts[cell_index(hateful, offensive, toxic)];
    }
    size_t get(bool hateful, bool offensive, bool toxic) const {
        return counts[cell_index(hateful, offensive, toxic)];
    }
    size_t total() const {
        size_t sum = 0;
        for (size_t c : counts) sum += c;
        return sum;
    }
};

using ItemLabels = std::array<std::optional<bool>, 3>;  // indexed by concept_index()

// Counts items into the eight HOT cells. Every item must carry all three
// labels; items with failed or uncertain parses are excluded by the caller.
inline VennPartition venn_partition(const std::vector<ItemLabels>& items) {
    VennPartition part;
    for (size_t i = 0; i < items.size(); ++i) {
        for (Concept c : kAllConcepts)
            if (!items[i][concept_index(c)])
                throw AnalysisError(AnalysisError::Kind::MissingConceptLabel,
                                    "item " + std::to_string(i) + " missing label for \"" +
                                        std::string(concept_name(c)) + "\"");
        ++part.at(*items[i][0], *items[i][1], *items[i][2]);
    }
    return part;
}

// ---------------------------------------------------------------------------
// Certainty bins
// ---------------------------------------------------------------------------

// Unlikely [0, 0.2], Uncertain (0.2, 0.8), Likely [0.8, 1].
enum class CertaintyBin { Unlikely, Uncertain, Likely };

inline std::string_view certainty_bin_name(CertaintyBin b) {
    switch (b) {
        case CertaintyBin::Unlikely: return "unlikely";
        case CertaintyBin::Uncertain: return "uncertain";
        case CertaintyBin::Likely: return "likely";
    }
    return "";
}

inline CertaintyBin certainty_bin(double p) {
    if (p < 0.0 || p > 1.0)
        throw AnalysisError(AnalysisError::Kind::OutOfRange, "certainty_bin: outside [0,1]");
    if (p <= 0.2) return CertaintyBin::Unlikely;
    if (p < 0.8) return CertaintyBin::Uncertain;
    return CertaintyBin::Likely;
}

// ---------------------------------------------------------------------------
// N-gram extraction
// ---------------------------------------------------------------------------

// Word tokens keep their case; punctuation characters stand alone as their
// own tokens. Bytes >= 0x80 are treated as word bytes so UTF-8 sequences
// stay intact.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    size_t i = 0;
    auto is_word_byte = [](unsigned char c) {
        return std::isalnum(c) || c >= 0x80 || c == '_';
    };
    while (i < text.size()) {
        unsigned char c = text[i];
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        if (is_word_byte(c)) {
            size_t j = i + 1;
            while (j < text.size()) {
                unsigned char d = text[j];
                if (is_word_byte(d)) {
                    ++j;
                } else if ((d == '\'' || d == '-') && j + 1 < text.size() &&
                           is_word_byte(static_cast<unsigned char>(text[j + 1]))) {
                    j += 2;  // keep contractions and hyphenated words together
                } else {
                    break;
                }
            }
            tokens.emplace_back(text.substr(i, j - i));
            i = j;
        } else {
            tokens.emplace_back(1, static_cast<char>(c));
            ++i;
        }
    }
    return tokens;
}

struct NgramEntry {
    std::vector<std::string> tokens;
    size_t count = 0;
};

struct NgramTable {
    int n = 3;
    std::vector<NgramEntry> entries;  // count desc, ties lexicographic
    std::string tokenizer_id = "word+punct/v1";
};

namespace detail {

inline bool is_stopword(const std::string& token) {
    static const std::set<std::string> words{
        "a",    "an",  "and", "are", "as",   "at",  "be",  "but", "by",   "for", "if",
        "in",   "is",  "it",  "its", "not",  "of",  "on",  "or",  "that", "the", "this",
        "to",   "was", "were", "with", "can", "could", "does", "do", "has", "have", "may"};
    if (words.count(to_lower(token))) return true;
    // Punctuation tokens count as stop tokens for suppression purposes.
    return token.size() == 1 && !std::isalnum(static_cast<unsigned char>(token[0]));
}

}  // namespace detail

// Sliding windows within each text; windows never cross text boundaries.
// With `suppress_stopword_only` set, tuples made entirely of stopwords and
// punctuation are dropped before ranking (off by default: raw frequency is
// the documented ranking).
inline NgramTable ngram_counts(const std::vector<std::string>& texts, int n, size_t top_k,
                               bool suppress_stopword_only = false) {
    if (n < 3 || n > 5)
        throw AnalysisError(AnalysisError::Kind::BadN, "ngram_counts: n must be 3, 4 or 5");
    std::map<std::vector<std::string>, size_t> counts;
    for (const auto& text : texts) {
        std::vector<std::string> tokens = tokenize(text);
        if (tokens.size() < static_cast<size_t>(n)) continue;
        for (size_t i = 0; i + n <= tokens.size(); ++i) {
            std::vector<std::string> tuple(tokens.begin() + i, tokens.begin() + i + n);
            ++counts[std::move(tuple)];
        }
    }
    std::vector<NgramEntry> entries;
    entries.reserve(counts.size());
    for (auto& [tuple, count] : counts) {
        if (suppress_stopword_only &&
            std::all_of(tuple.begin(), tuple.end(), detail::is_stopword))
            continue;
        entries.push_back({tuple, count});
    }
    std::stable_sort(entries.begin(), entries.end(), [](const NgramEntry& a, const NgramEntry& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.tokens < b.tokens;
    });
    if (entries.size() > top_k) entries.resize(top_k);
    NgramTable table;
    table.n = n;
    table.entries = std::move(entries);
    return table;
}

// ---------------------------------------------------------------------------
// Probability histogram
// ---------------------------------------------------------------------------

struct HistogramBin {
    double start = 0.0;
    size_t count = 0;
};

// Left-closed bins [k*w, (k+1)*w); the final bin is right-closed at 1.0.
inline std::vector<HistogramBin> histogram(const std::vector<double>& probs, double bin_width) {
    if (!(bin_width > 0.0) || bin_width > 1.0)
        throw AnalysisError(AnalysisError::Kind::BadBinWidth, "histogram: bad bin width");
    const size_t nbins = static_cast<size_t>(std::ceil(1.0 / bin_width - 1e-12));
    std::vector<HistogramBin> bins(nbins);
    for (size_t k = 0; k < nbins; ++k) bins[k].start = static_cast<double>(k) * bin_width;
    for (double p : probs) {
        if (p < 0.0 || p > 1.0)
            throw AnalysisError(AnalysisError::Kind::OutOfRange, "histogram: probability outside [0,1]");
        size_t k = static_cast<size_t>(p / bin_width);
        if (k >= nbins) k = nbins - 1;
        ++bins[k].count;
    }
    return bins;
}

// ---------------------------------------------------------------------------
// Reproducible sampling for manual reading
// ---------------------------------------------------------------------------

namespace detail {

// Rejection-sampled bounded draw; keeps samples identical across platforms
// (std::uniform_int_distribution is implementation-defined).
inline uint64_t bounded_draw(std::mt19937_64& rng, uint64_t bound) {
    const uint64_t limit = std::numeric_limits<uint64_t>::max() -
                           (std::numeric_limits<uint64_t>::max() % bound);
    uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % bound;
}

}  // namespace detail

// Uniform sample without replacement, deterministic under a fixed seed.
// Returns the whole cell when it has at most k members.
inline std::vector<std::string> sample_cell(std::vector<std::string> cell_ids, size_t k,
                                            uint64_t seed) {
    std::mt19937_64 rng(seed);
    if (cell_ids.size() <= k) return cell_ids;
    // Partial Fisher-Yates: the first k slots become the sample.
    for (size_t i = 0; i < k; ++i) {
        size_t j = i + static_cast<size_t>(detail::bounded_draw(rng, cell_ids.size() - i));
        std::swap(cell_ids[i], cell_ids[j]);
    }
    cell_ids.resize(k);
    return cell_ids;
}

// Convenience overload: filters fully-labeled items into the requested cell
// first.
inline std::vector<std::string> sample_cell(const std::array<bool, 3>& cell,
                                            const std::vector<std::pair<std::string, ItemLabels>>& items,
                                            size_t k, uint64_t seed) {
    std::vector<std::string> ids;
    for (const auto& [id, labels] : items) {
        if (!labels[0] || !labels[1] || !labels[2]) continue;
        if (*labels[0] == cell[0] && *labels[1] == cell[1] && *labels[2] == cell[2])
            ids.push_back(id);
    }
    return sample_cell(std::move(ids), k, seed);
}

}  // namespace hot
