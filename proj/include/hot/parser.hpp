#pragma once

#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hot/prompts.hpp"
#include "hot/util.hpp"

namespace hot {

enum class BinaryOutcome { Yes, No, Uncertain };

inline std::string_view binary_outcome_name(BinaryOutcome o) {
    switch (o) {
        case BinaryOutcome::Yes: return "yes";
        case BinaryOutcome::No: return "no";
        case BinaryOutcome::Uncertain: return "uncertain";
    }
    return "";
}

// Strict: anything that is not a definitive yes/no lead is a failure.
// Lenient: it becomes Uncertain instead (used for the MTurk-style and
// explanation-bearing prompts where hedged prose is expected).
enum class ParseMode { Strict, Lenient };

struct ParseFailure {
    enum class Reason { WrongClass, NoScore, OutOfRange, Empty };
    Reason reason{};
    double value = 0.0;  // offending value for OutOfRange
    std::string raw_excerpt;
};

inline std::string_view parse_failure_name(ParseFailure::Reason r) {
    switch (r) {
        case ParseFailure::Reason::WrongClass: return "wrong_class";
        case ParseFailure::Reason::NoScore: return "no_score";
        case ParseFailure::Reason::OutOfRange: return "out_of_range";
        case ParseFailure::Reason::Empty: return "empty";
    }
    return "";
}

struct ParsedOutput {
    enum class Kind { Binary, Probability };
    Kind kind = Kind::Binary;
    BinaryOutcome binary = BinaryOutcome::Uncertain;
    double probability = 0.0;
    std::optional<std::string> explanation;
    PromptId source_prompt = PromptId::P1;
    // Set when the score arrived as a percentage and was normalized by /100.
    bool percent_normalized = false;
};

using BinaryParse = std::variant<BinaryOutcome, ParseFailure>;
using ProbabilityParse = std::variant<ParsedOutput, ParseFailure>;

struct SplitAnswer {
    std::string answer_line;
    std::optional<std::string> explanation;
};
using SplitResult = std::variant<SplitAnswer, ParseFailure>;

namespace detail {

inline std::string excerpt(std::string_view raw) { return std::string(raw.substr(0, 200)); }

inline bool is_word_boundary(std::string_view s, size_t pos) {
    return pos >= s.size() || !std::isalpha(static_cast<unsigned char>(s[pos]));
}

// Matches a yes/no token at the start of `s` (case-insensitive, must end at
// a word boundary). Returns the outcome and token length.
inline std::optional<std::pair<BinaryOutcome, size_t>> match_yes_no(std::string_view s) {
    std::string low = to_lower(s.substr(0, 4));
    if (low.rfind("yes", 0) == 0 && is_word_boundary(s, 3)) return {{BinaryOutcome::Yes, 3}};
    if (low.rfind("no", 0) == 0 && is_word_boundary(s, 2)) return {{BinaryOutcome::No, 2}};
    return std::nullopt;
}

// Strips markdown/bullet decoration and leading punctuation ahead of the
// answer token: whitespace, bullets, quotes, and a single "1." / "1)"
// enumerator.
inline std::string_view strip_lead_decoration(std::string_view s, bool strip_enumerator) {
    size_t i = 0;
    auto skip_ws = [&] {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    };
    skip_ws();
    while (i < s.size() && (s[i] == '-' || s[i] == '*' || s[i] == '>' || s[i] == '#')) {
        ++i;
        skip_ws();
    }
    if (strip_enumerator) {
        size_t j = i;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i && j < s.size() && (s[j] == '.' || s[j] == ')')) {
            size_t k = j + 1;
            if (k < s.size() && std::isspace(static_cast<unsigned char>(s[k]))) {
                i = k;
                skip_ws();
            }
        }
    }
    while (i < s.size() &&
           (s[i] == '"' || s[i] == '\'' || s[i] == '(' || s[i] == '[' || s[i] == ':' ||
            s[i] == '*' || s[i] == '`')) {
        ++i;
        skip_ws();
    }
    return s.substr(i);
}

// Scans for the first numeric literal in `s`; accepts "0", "1", "0.x", ".x"
// and percentage forms ("80%", normalized by /100).
struct NumericHit {
    double value;
    bool from_percent;
    size_t end;  // offset just past the literal (incl. '%')
};

inline std::optional<NumericHit> find_first_number(std::string_view s) {
    for (size_t i = 0; i < s.size(); ++i) {
        bool digit = std::isdigit(static_cast<unsigned char>(s[i]));
        bool dot_start = s[i] == '.' && i + 1 < s.size() &&
                         std::isdigit(static_cast<unsigned char>(s[i + 1]));
        if (!digit && !dot_start) continue;
        size_t start = i;
        bool negative = false;
        if (start > 0 && (s[start - 1] == '-' || s[start - 1] == '+')) {
            negative = s[start - 1] == '-';
        }
        size_t j = i;
        bool seen_dot = false;
        while (j < s.size()) {
            if (std::isdigit(static_cast<unsigned char>(s[j]))) {
                ++j;
            } else if (s[j] == '.' && !seen_dot && j + 1 < s.size() &&
                       std::isdigit(static_cast<unsigned char>(s[j + 1]))) {
                seen_dot = true;
                ++j;
            } else {
                break;
            }
        }
        double v = std::stod(std::string(s.substr(start, j - start)));
        if (negative) v = -v;
        bool percent = j < s.size() && s[j] == '%';
        if (percent) {
            v /= 100.0;
            ++j;
        }
        return NumericHit{v, percent, j};
    }
    return std::nullopt;
}

// A response that enumerates two or more answers ("1. Yes\n2. No", or two
// numbered scores) was treated as multiple comments by the model and is
// excluded as wrong class.
inline bool is_multi_answer(const std::vector<std::string>& lines) {
    int answers = 0;
    for (const auto& line : lines) {
        std::string_view s = line;
        size_t i = 0;
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        size_t d = i;
        while (d < s.size() && std::isdigit(static_cast<unsigned char>(s[d]))) ++d;
        if (d == i || d >= s.size() || (s[d] != '.' && s[d] != ')')) continue;
        // Whitespace after the marker separates "1. Yes" from a decimal "0.8".
        if (d + 1 >= s.size() || !std::isspace(static_cast<unsigned char>(s[d + 1]))) continue;
        std::string_view rest = strip_lead_decoration(s.substr(d + 1), false);
        if (match_yes_no(rest) || find_first_number(rest)) ++answers;
        if (answers >= 2) return true;
    }
    return false;
}

inline std::string_view first_nonempty_line(const std::vector<std::string>& lines) {
    for (const auto& line : lines)
        if (!trim_view(line).empty()) return line;
    return {};
}

}  // namespace detail

// Classifies the first-line answer token of a raw response. Hedging later in
// the text never flips a definitive lead token.
inline BinaryParse parse_binary(std::string_view raw, ParseMode mode) {
    if (trim_view(raw).empty())
        return ParseFailure{ParseFailure::Reason::Empty, 0.0, detail::excerpt(raw)};
    auto lines = split_lines(raw);
    if (detail::is_multi_answer(lines))
        return ParseFailure{ParseFailure::Reason::WrongClass, 0.0, detail::excerpt(raw)};
    std::string_view first = detail::first_nonempty_line(lines);
    std::string_view lead = detail::strip_lead_decoration(first, /*strip_enumerator=*/true);
    if (auto hit = detail::match_yes_no(lead)) return hit->first;
    if (mode == ParseMode::Strict)
        return ParseFailure{ParseFailure::Reason::WrongClass, 0.0, detail::excerpt(raw)};
    return BinaryOutcome::Uncertain;
}

// Extracts the first-line probability score; remaining text becomes the
// explanation.
inline ProbabilityParse parse_probability(std::string_view raw) {
    if (trim_view(raw).empty())
        return ParseFailure{ParseFailure::Reason::Empty, 0.0, detail::excerpt(raw)};
    auto lines = split_lines(raw);
    if (detail::is_multi_answer(lines))
        return ParseFailure{ParseFailure::Reason::WrongClass, 0.0, detail::excerpt(raw)};

    size_t first_idx = 0;
    while (first_idx < lines.size() && trim_view(lines[first_idx]).empty()) ++first_idx;
    std::string_view first = lines[first_idx];

    auto hit = detail::find_first_number(first);
    if (!hit) return ParseFailure{ParseFailure::Reason::NoScore, 0.0, detail::excerpt(raw)};
    if (hit->value < 0.0 || hit->value > 1.0)
        return ParseFailure{ParseFailure::Reason::OutOfRange, hit->value, detail::excerpt(raw)};

    ParsedOutput out;
    out.kind = ParsedOutput::Kind::Probability;
    out.probability = hit->value;
    out.percent_normalized = hit->from_percent;

    std::string explanation(trim_view(first.substr(hit->end)));
    for (size_t i = first_idx + 1; i < lines.size(); ++i) {
        std::string_view t = trim_view(lines[i]);
        if (t.empty()) continue;
        if (!explanation.empty()) explanation += '\n';
        explanation += t;
    }
    bool has_content = std::any_of(explanation.begin(), explanation.end(), [](unsigned char c) {
        return std::isalnum(c);
    });
    if (has_content) out.explanation = std::move(explanation);
    return out;
}

// Splits a response into its first-line answer and the trailing explanation.
// A single-line "Yes. The comment ..." response is split at the first
// sentence terminator after the answer token.
inline SplitResult split_explanation(std::string_view raw) {
    if (trim_view(raw).empty())
        return ParseFailure{ParseFailure::Reason::Empty, 0.0, detail::excerpt(raw)};
    auto lines = split_lines(raw);
    size_t first_idx = 0;
    while (first_idx < lines.size() && trim_view(lines[first_idx]).empty()) ++first_idx;
    std::string first(trim_view(lines[first_idx]));

    SplitAnswer out;
    std::string inline_rest;
    std::string_view lead = detail::strip_lead_decoration(first, /*strip_enumerator=*/true);
    auto hit = detail::match_yes_no(lead);
    if (hit) {
        size_t token_end = first.size() - lead.size() + hit->second;
        size_t term = first.find_first_of(".!?", token_end);
        if (term != std::string::npos && !trim_view(std::string_view(first).substr(term + 1)).empty()) {
            inline_rest = trim(std::string_view(first).substr(term + 1));
            first.resize(term + 1);
        }
    }
    out.answer_line = first;

    std::string explanation = inline_rest;
    for (size_t i = first_idx + 1; i < lines.size(); ++i) {
        std::string_view t = trim_view(lines[i]);
        if (t.empty()) continue;
        if (!explanation.empty()) explanation += '\n';
        explanation += t;
    }
    if (!trim_view(explanation).empty()) out.explanation = std::move(explanation);
    return out;
}

}  // namespace hot
