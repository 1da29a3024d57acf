#pragma once

#include <array>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "hot/util.hpp"

namespace hot {

// The three target concepts. Canonical ordering (Hateful < Offensive < Toxic)
// keys every partition, report and threshold triple in the toolkit.
enum class Concept { Hateful = 0, Offensive = 1, Toxic = 2 };

inline constexpr std::array<Concept, 3> kAllConcepts{Concept::Hateful, Concept::Offensive,
                                                     Concept::Toxic};

inline constexpr size_t concept_index(Concept c) { return static_cast<size_t>(c); }

inline std::string_view concept_name(Concept c) {
    switch (c) {
        case Concept::Hateful: return "hateful";
        case Concept::Offensive: return "offensive";
        case Concept::Toxic: return "toxic";
    }
    return "";
}

inline std::string_view concept_display_name(Concept c) {
    switch (c) {
        case Concept::Hateful: return "Hateful";
        case Concept::Offensive: return "Offensive";
        case Concept::Toxic: return "Toxic";
    }
    return "";
}

inline std::optional<Concept> concept_from_string(std::string_view s) {
    std::string v = to_lower(trim_view(s));
    if (v == "hateful") return Concept::Hateful;
    if (v == "offensive") return Concept::Offensive;
    if (v == "toxic") return Concept::Toxic;
    return std::nullopt;
}

enum class Platform { Reddit, Twitter, YouTube, Other };

inline std::string_view platform_name(Platform p) {
    switch (p) {
        case Platform::Reddit: return "reddit";
        case Platform::Twitter: return "twitter";
        case Platform::YouTube: return "youtube";
        case Platform::Other: return "other";
    }
    return "other";
}

inline std::optional<Platform> platform_from_string(std::string_view s) {
    std::string v = to_lower(trim_view(s));
    if (v == "reddit") return Platform::Reddit;
    if (v == "twitter") return Platform::Twitter;
    if (v == "youtube") return Platform::YouTube;
    if (v == "other") return Platform::Other;
    return std::nullopt;
}

// Reference definition of one concept, as handed to both human raters and
// the model.
struct ConceptDefinition {
    Concept id;
    std::string text;
};

// Built-in definition texts. Overridable at the prompt-rendering layer;
// classification of what counts as hateful/offensive/toxic is entirely
// driven by these strings, so swapping them changes every downstream label.
inline const ConceptDefinition& concept_definition(Concept c) {
    static const std::array<ConceptDefinition, 3> defs{{
        {Concept::Hateful,
         "expresses hatred towards a targeted group or is intended to be derogatory, to "
         "humiliate, or to insult the members of the group"},
        {Concept::Offensive, "contains hurtful, derogatory, or obscene comments"},
        {Concept::Toxic,
         "a rude, disrespectful, or unreasonable comment that is likely to make readers want to "
         "leave a discussion"},
    }};
    return defs[concept_index(c)];
}

struct VoteError : std::runtime_error {
    enum class Kind { EmptyVotes, EvenArity };
    Kind kind;
    explicit VoteError(Kind k)
        : std::runtime_error(k == Kind::EmptyVotes ? "majority_vote: empty vote list"
                                                   : "majority_vote: even vote count has no tie rule"),
          kind(k) {}
};

// True iff strictly more than half of the votes are true. Only odd arities
// are accepted; an even count has no defined tie rule and is rejected.
inline bool majority_vote(const std::vector<bool>& votes) {
    if (votes.empty()) throw VoteError(VoteError::Kind::EmptyVotes);
    if (votes.size() % 2 == 0) throw VoteError(VoteError::Kind::EvenArity);
    size_t trues = 0;
    for (bool v : votes)
        if (v) ++trues;
    return trues * 2 > votes.size();
}

struct Comment {
    std::string id;
    Platform platform = Platform::Other;
    std::string text;
};

// One comment plus the per-concept rater votes and derived majority labels.
// Immutable after construction.
struct AnnotationRecord {
    Comment comment;
    std::array<std::vector<bool>, 3> votes;  // indexed by concept_index()
    std::array<bool, 3> majority{};

    const std::vector<bool>& votes_for(Concept c) const { return votes[concept_index(c)]; }
    bool majority_for(Concept c) const { return majority[concept_index(c)]; }
};

struct CorpusMetadata {
    std::string source_path;
    std::string loaded_at;  // informational; never enters fingerprints or reports
    size_t record_count = 0;
};

struct Corpus {
    std::vector<AnnotationRecord> records;
    CorpusMetadata metadata;

    size_t size() const { return records.size(); }
};

struct CorpusError : std::runtime_error {
    enum class Kind { FileNotFound, MalformedLine, DuplicateId, VoteArityMismatch };
    Kind kind;
    size_t line = 0;        // 1-based, for MalformedLine
    std::string record_id;  // for DuplicateId / VoteArityMismatch

    CorpusError(Kind k, std::string msg, size_t line_no = 0, std::string id = {})
        : std::runtime_error(std::move(msg)), kind(k), line(line_no), record_id(std::move(id)) {}
};

namespace detail {

inline std::vector<bool> parse_vote_array(const nlohmann::json& j, size_t line_no) {
    if (!j.is_array())
        throw CorpusError(CorpusError::Kind::MalformedLine,
                          "line " + std::to_string(line_no) + ": votes must be an array of booleans",
                          line_no);
    std::vector<bool> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_boolean())
            throw CorpusError(CorpusError::Kind::MalformedLine,
                              "line " + std::to_string(line_no) + ": non-boolean vote", line_no);
        out.push_back(v.get<bool>());
    }
    return out;
}

inline AnnotationRecord parse_record_line(const std::string& line, size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw CorpusError(CorpusError::Kind::MalformedLine,
                          "line " + std::to_string(line_no) + ": invalid JSON: " + e.what(), line_no);
    }
    auto require_field = [&](const char* name) -> const nlohmann::json& {
        if (!j.contains(name))
            throw CorpusError(CorpusError::Kind::MalformedLine,
                              "line " + std::to_string(line_no) + ": missing field \"" +
                                  std::string(name) + "\"",
                              line_no);
        return j.at(name);
    };

    AnnotationRecord rec;
    const auto& jid = require_field("id");
    if (!jid.is_string() || trim(jid.get<std::string>()).empty())
        throw CorpusError(CorpusError::Kind::MalformedLine,
                          "line " + std::to_string(line_no) + ": id must be a non-empty string",
                          line_no);
    rec.comment.id = jid.get<std::string>();

    auto platform = platform_from_string(require_field("platform").get<std::string>());
    if (!platform)
        throw CorpusError(CorpusError::Kind::MalformedLine,
                          "line " + std::to_string(line_no) + ": unknown platform", line_no);
    rec.comment.platform = *platform;

    const auto& jtext = require_field("text");
    if (!jtext.is_string() || trim(jtext.get<std::string>()).empty())
        throw CorpusError(CorpusError::Kind::MalformedLine,
                          "line " + std::to_string(line_no) + ": text must be non-empty", line_no);
    rec.comment.text = jtext.get<std::string>();

    const auto& jvotes = require_field("votes");
    for (Concept c : kAllConcepts) {
        std::string key(concept_name(c));
        if (!jvotes.contains(key))
            throw CorpusError(CorpusError::Kind::MalformedLine,
                              "line " + std::to_string(line_no) + ": votes missing \"" + key + "\"",
                              line_no);
        rec.votes[concept_index(c)] = parse_vote_array(jvotes.at(key), line_no);
    }

    const size_t arity = rec.votes[0].size();
    if (rec.votes[1].size() != arity || rec.votes[2].size() != arity)
        throw CorpusError(CorpusError::Kind::VoteArityMismatch,
                          "record \"" + rec.comment.id + "\": vote counts differ across concepts",
                          line_no, rec.comment.id);
    if (arity == 0 || arity > 9 || arity % 2 == 0)
        throw CorpusError(CorpusError::Kind::VoteArityMismatch,
                          "record \"" + rec.comment.id + "\": vote count must be odd and in 1..9",
                          line_no, rec.comment.id);

    for (Concept c : kAllConcepts)
        rec.majority[concept_index(c)] = majority_vote(rec.votes[concept_index(c)]);
    return rec;
}

}  // namespace detail

// Loads a JSONL corpus, one annotation record per line. Majority labels are
// derived here; the file never stores them.
inline Corpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw CorpusError(CorpusError::Kind::FileNotFound,
                          "corpus file not found: " + path.string());
    Corpus corpus;
    corpus.metadata.source_path = path.string();
    corpus.metadata.loaded_at = iso8601_now();

    std::string line;
    size_t line_no = 0;
    std::unordered_set<std::string> seen_ids;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_view(line).empty()) continue;
        AnnotationRecord rec = detail::parse_record_line(line, line_no);
        if (!seen_ids.insert(rec.comment.id).second)
            throw CorpusError(CorpusError::Kind::DuplicateId,
                              "duplicate comment id \"" + rec.comment.id + "\"", line_no,
                              rec.comment.id);
        corpus.records.push_back(std::move(rec));
    }
    corpus.metadata.record_count = corpus.records.size();
    return corpus;
}

// Writes the corpus back out in the load_corpus schema (votes only; majority
// labels stay derived).
inline void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open corpus file for writing: " + path.string());
    for (const auto& rec : corpus.records) {
        nlohmann::json votes;
        for (Concept c : kAllConcepts)
            votes[std::string(concept_name(c))] = rec.votes[concept_index(c)];
        nlohmann::json j{{"id", rec.comment.id},
                         {"platform", std::string(platform_name(rec.comment.platform))},
                         {"text", rec.comment.text},
                         {"votes", votes}};
        out << j.dump() << '\n';
    }
}

// Content fingerprint over sorted (id, text) pairs; guards cross-prompt
// comparisons against corpus drift. Independent of file path and load time.
inline std::string corpus_fingerprint(const Corpus& corpus) {
    std::vector<std::pair<std::string, const std::string*>> items;
    items.reserve(corpus.records.size());
    for (const auto& rec : corpus.records) items.emplace_back(rec.comment.id, &rec.comment.text);
    std::sort(items.begin(), items.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    uint64_t h = fnv1a64("hot-corpus-v1");
    for (const auto& [id, text] : items) {
        h = fnv1a64(id, h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(*text, h);
        h = fnv1a64("\x1e", h);
    }
    return to_hex(h);
}

}  // namespace hot
