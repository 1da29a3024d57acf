#pragma once

#include <array>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hot/corpus.hpp"
#include "hot/util.hpp"

namespace hot {

enum class PromptId { P1 = 1, P2 = 2, P3 = 3, P4 = 4, P5 = 5 };

inline constexpr std::array<PromptId, 5> kAllPrompts{PromptId::P1, PromptId::P2, PromptId::P3,
                                                     PromptId::P4, PromptId::P5};

inline std::string_view prompt_name(PromptId id) {
    switch (id) {
        case PromptId::P1: return "P1";
        case PromptId::P2: return "P2";
        case PromptId::P3: return "P3";
        case PromptId::P4: return "P4";
        case PromptId::P5: return "P5";
    }
    return "";
}

inline std::optional<PromptId> prompt_from_string(std::string_view s) {
    std::string v = to_lower(trim_view(s));
    if (v == "p1" || v == "1") return PromptId::P1;
    if (v == "p2" || v == "2") return PromptId::P2;
    if (v == "p3" || v == "3") return PromptId::P3;
    if (v == "p4" || v == "4") return PromptId::P4;
    if (v == "p5" || v == "5") return PromptId::P5;
    return std::nullopt;
}

// What the instruction asks the model to emit. MTurkStyle mirrors the exact
// multiple-choice question shown to the human raters.
enum class OutputKind { MTurkStyle, Binary, Probability };

inline std::string_view output_kind_name(OutputKind k) {
    switch (k) {
        case OutputKind::MTurkStyle: return "mturk_style";
        case OutputKind::Binary: return "binary";
        case OutputKind::Probability: return "probability";
    }
    return "";
}

// Prompt-pattern tags carried as metadata. No built-in template uses the
// persona pattern, so it has no enumerator here.
enum class PromptPattern { OutputAutomatorBinary, OutputAutomatorProbability, Template, ContextManager };

inline std::string_view pattern_name(PromptPattern p) {
    switch (p) {
        case PromptPattern::OutputAutomatorBinary: return "output-automator:binary";
        case PromptPattern::OutputAutomatorProbability: return "output-automator:probability";
        case PromptPattern::Template: return "template";
        case PromptPattern::ContextManager: return "context-manager";
    }
    return "";
}

struct PromptTemplate {
    PromptId id{};
    OutputKind output_kind{};
    bool wants_explanation = false;
    // Instruction body with <CONCEPT> and <DEFINITION> placeholders.
    std::string body;
    std::vector<PromptPattern> patterns;
};

struct RenderedPrompt {
    PromptId prompt_id{};
    Concept target{};
    std::string comment_id;
    std::string instruction_text;
    std::string comment_text;
};

struct PromptError : std::runtime_error {
    enum class Kind { MissingDefinition, UnknownTemplate, BadOverride };
    Kind kind;
    PromptError(Kind k, std::string msg) : std::runtime_error(std::move(msg)), kind(k) {}
};

// Per-concept text that substitutes <DEFINITION>. `text` is the bare
// definition; `clause` is the exact fragment spliced after "that it" in the
// instruction, carrying its own quoting, copula and final period so the
// built-in renderings match the wording sent to the model byte for byte.
struct DefinitionEntry {
    std::string text;
    std::string clause;
};

class DefinitionSource {
public:
    static DefinitionSource builtin() {
        DefinitionSource src;
        src.set(Concept::Hateful,
                {"expresses hatred toward a targeted group or is intended to be derogatory, to "
                 "humiliate, or to insult the members of the group",
                 "\"expresses hatred toward a targeted group or is intended to be derogatory, to "
                 "humiliate, or to insult the members of the group.\""});
        src.set(Concept::Offensive,
                {"a hurtful, derogatory or obscene comment",
                 "is \"a hurtful, derogatory or obscene comment.\""});
        src.set(Concept::Toxic,
                {"a rude, disrespectful, or unreasonable comment that is likely to make readers "
                 "want to leave a discussion",
                 "is \"a rude, disrespectful, or unreasonable comment that is likely to make "
                 "readers want to leave a discussion.\""});
        return src;
    }

    static DefinitionSource empty() { return DefinitionSource{}; }

    void set(Concept c, DefinitionEntry entry) { entries_[concept_index(c)] = std::move(entry); }

    // Replaces the definition text for `c`; the spliced clause is rebuilt as
    // a quoted noun-phrase ('is "<text>."') unless `verb_phrase` is set.
    void override_text(Concept c, std::string text, bool verb_phrase = false) {
        DefinitionEntry entry;
        entry.clause = (verb_phrase ? "\"" : "is \"") + text + ".\"";
        entry.text = std::move(text);
        set(c, std::move(entry));
    }

    const DefinitionEntry& get(Concept c) const {
        const auto& e = entries_[concept_index(c)];
        if (!e)
            throw PromptError(PromptError::Kind::MissingDefinition,
                              "no definition for concept \"" + std::string(concept_name(c)) + "\"");
        return *e;
    }

    bool has(Concept c) const { return entries_[concept_index(c)].has_value(); }

    // Override file schema: {"hateful": {"text": "...", "verb_phrase": true}, ...}
    // or simply {"hateful": "..."} for noun-phrase definitions.
    static DefinitionSource from_json(const nlohmann::json& j) {
        DefinitionSource src = builtin();
        for (auto it = j.begin(); it != j.end(); ++it) {
            auto c = concept_from_string(it.key());
            if (!c)
                throw PromptError(PromptError::Kind::BadOverride,
                                  "unknown concept in definition override: " + it.key());
            if (it.value().is_string()) {
                src.override_text(*c, it.value().get<std::string>());
            } else if (it.value().is_object()) {
                src.override_text(*c, it.value().at("text").get<std::string>(),
                                  it.value().value("verb_phrase", false));
            } else {
                throw PromptError(PromptError::Kind::BadOverride,
                                  "definition override must be string or object");
            }
        }
        return src;
    }

private:
    std::array<std::optional<DefinitionEntry>, 3> entries_;
};

namespace detail {

inline std::array<PromptTemplate, 5> builtin_templates() {
    const std::string binary_head =
        "I want you to perform a data annotation task. In your output, I want you to return "
        "either yes or no, depending on whether you think the following comment is <CONCEPT>. "
        "A comment is \"<CONCEPT>\" if you perceive that it <DEFINITION>";
    const std::string probability_head =
        "I want you to provide a probability score between 0 to 1 where the score represents "
        "the probability of the following comment being <CONCEPT>. A comment is \"<CONCEPT>\" "
        "if you perceive that it <DEFINITION> A probability of 1 means that the comment is "
        "highly likely to be <CONCEPT>. A probability of 0 means that the comment is highly "
        "unlikely to be <CONCEPT>.";
    const std::string no_extras =
        "Do not provide any other outputs or any explanation for your output.";

    std::array<PromptTemplate, 5> t;
    t[0] = PromptTemplate{
        PromptId::P1, OutputKind::MTurkStyle, false,
        "Do you think this comment is <CONCEPT>? A comment is \"<CONCEPT>\" if you perceive "
        "that it <DEFINITION>\na. Yes\nb. No",
        {PromptPattern::ContextManager}};
    t[1] = PromptTemplate{PromptId::P2, OutputKind::Binary, false,
                          binary_head + " I want you to only respond with yes or no. " + no_extras,
                          {PromptPattern::OutputAutomatorBinary, PromptPattern::ContextManager}};
    t[2] = PromptTemplate{PromptId::P3, OutputKind::Probability, false,
                          probability_head + " " + no_extras,
                          {PromptPattern::OutputAutomatorProbability, PromptPattern::ContextManager}};
    t[3] = PromptTemplate{PromptId::P4, OutputKind::Binary, true,
                          binary_head +
                              " I want you to respond with yes or no in the first line and "
                              "provide an explanation for your output in the second line.",
                          {PromptPattern::OutputAutomatorBinary, PromptPattern::Template,
                           PromptPattern::ContextManager}};
    t[4] = PromptTemplate{PromptId::P5, OutputKind::Probability, true,
                          probability_head +
                              " I want you to respond with a probabilistic score in the first "
                              "line and provide an explanation for your score in the second line.",
                          {PromptPattern::OutputAutomatorProbability, PromptPattern::Template,
                           PromptPattern::ContextManager}};
    return t;
}

}  // namespace detail

class PromptCatalog {
public:
    static PromptCatalog builtin() { return PromptCatalog(detail::builtin_templates()); }

    const std::array<PromptTemplate, 5>& list() const { return templates_; }

    const PromptTemplate& get(PromptId id) const {
        for (const auto& t : templates_)
            if (t.id == id) return t;
        throw PromptError(PromptError::Kind::UnknownTemplate, "unknown prompt id");
    }

    // Body overrides keep the template's kind/explanation flags; only the
    // instruction text changes. Schema: {"P2": "body with <CONCEPT>...", ...}
    void apply_template_overrides(const nlohmann::json& j) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            auto id = prompt_from_string(it.key());
            if (!id)
                throw PromptError(PromptError::Kind::BadOverride,
                                  "unknown prompt id in override: " + it.key());
            if (!it.value().is_string())
                throw PromptError(PromptError::Kind::BadOverride, "override body must be a string");
            for (auto& t : templates_)
                if (t.id == *id) t.body = it.value().get<std::string>();
        }
    }

    void apply_template_overrides_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in)
            throw PromptError(PromptError::Kind::BadOverride,
                              "cannot open template override file: " + path.string());
        nlohmann::json j;
        in >> j;
        apply_template_overrides(j);
    }

    RenderedPrompt render(PromptId id, Concept c, const Comment& comment,
                          const DefinitionSource& defs) const {
        const PromptTemplate& tpl = get(id);
        const DefinitionEntry& def = defs.get(c);
        std::string text = tpl.body;
        replace_all(text, "<CONCEPT>", concept_name(c));
        replace_all(text, "<DEFINITION>", def.clause);
        RenderedPrompt out;
        out.prompt_id = id;
        out.target = c;
        out.comment_id = comment.id;
        out.instruction_text = std::move(text);
        out.comment_text = comment.text;
        return out;
    }

private:
    explicit PromptCatalog(std::array<PromptTemplate, 5> t) : templates_(std::move(t)) {}
    std::array<PromptTemplate, 5> templates_;
};

inline const PromptCatalog& builtin_catalog() {
    static const PromptCatalog catalog = PromptCatalog::builtin();
    return catalog;
}

inline std::array<PromptTemplate, 5> list_prompts() { return builtin_catalog().list(); }

inline RenderedPrompt render_prompt(PromptId id, Concept c, const Comment& comment,
                                    const DefinitionSource& defs) {
    return builtin_catalog().render(id, c, comment, defs);
}

}  // namespace hot
