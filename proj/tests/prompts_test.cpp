#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "hot/prompts.hpp"

using namespace hot;

namespace {

const Comment kComment{"c42", Platform::Reddit, "Some comment under test."};

// Instruction texts as sent to the model, reproduced in full for the
// byte-level checks below.
const std::string kP2Hateful =
    "I want you to perform a data annotation task. In your output, I want you to return either "
    "yes or no, depending on whether you think the following comment is hateful. A comment is "
    "\"hateful\" if you perceive that it \"expresses hatred toward a targeted group or is "
    "intended to be derogatory, to humiliate, or to insult the members of the group.\" I want "
    "you to only respond with yes or no. Do not provide any other outputs or any explanation "
    "for your output.";

const std::string kP2Offensive =
    "I want you to perform a data annotation task. In your output, I want you to return either "
    "yes or no, depending on whether you think the following comment is offensive. A comment is "
    "\"offensive\" if you perceive that it is \"a hurtful, derogatory or obscene comment.\" I "
    "want you to only respond with yes or no. Do not provide any other outputs or any "
    "explanation for your output.";

const std::string kP3Toxic =
    "I want you to provide a probability score between 0 to 1 where the score represents the "
    "probability of the following comment being toxic. A comment is \"toxic\" if you perceive "
    "that it is \"a rude, disrespectful, or unreasonable comment that is likely to make readers "
    "want to leave a discussion.\" A probability of 1 means that the comment is highly likely "
    "to be toxic. A probability of 0 means that the comment is highly unlikely to be toxic. Do "
    "not provide any other outputs or any explanation for your output.";

const std::string kP1Offensive =
    "Do you think this comment is offensive? A comment is \"offensive\" if you perceive that "
    "it is \"a hurtful, derogatory or obscene comment.\"\na. Yes\nb. No";

const std::string kP5Hateful =
    "I want you to provide a probability score between 0 to 1 where the score represents the "
    "probability of the following comment being hateful. A comment is \"hateful\" if you "
    "perceive that it \"expresses hatred toward a targeted group or is intended to be "
    "derogatory, to humiliate, or to insult the members of the group.\" A probability of 1 "
    "means that the comment is highly likely to be hateful. A probability of 0 means that the "
    "comment is highly unlikely to be hateful. I want you to respond with a probabilistic "
    "score in the first line and provide an explanation for your score in the second line.";

}  // namespace

TEST_CASE("catalog lists exactly five templates with the right flags") {
    auto templates = list_prompts();
    REQUIRE(templates.size() == 5);
    CHECK(templates[0].id == PromptId::P1);
    CHECK(templates[0].output_kind == OutputKind::MTurkStyle);
    CHECK(templates[1].output_kind == OutputKind::Binary);
    CHECK(templates[2].output_kind == OutputKind::Probability);
    CHECK(templates[3].output_kind == OutputKind::Binary);
    CHECK(templates[4].output_kind == OutputKind::Probability);
    for (const auto& t : templates)
        CHECK(t.wants_explanation == (t.id == PromptId::P4 || t.id == PromptId::P5));

    const std::string no_extras = "Do not provide any other outputs or any explanation";
    CHECK(builtin_catalog().get(PromptId::P2).body.find(no_extras) != std::string::npos);
    CHECK(builtin_catalog().get(PromptId::P3).body.find(no_extras) != std::string::npos);
    CHECK(builtin_catalog().get(PromptId::P4).body.find(no_extras) == std::string::npos);
}

TEST_CASE("pattern tags: no template carries a persona pattern") {
    for (const auto& t : list_prompts()) {
        for (PromptPattern p : t.patterns)
            CHECK(pattern_name(p).find("persona") == std::string_view::npos);
        // Every template provides the definition context.
        CHECK(std::count(t.patterns.begin(), t.patterns.end(), PromptPattern::ContextManager) == 1);
    }
}

TEST_CASE("rendered instructions are byte-identical to the reference prompts") {
    DefinitionSource defs = DefinitionSource::builtin();
    CHECK(render_prompt(PromptId::P2, Concept::Hateful, kComment, defs).instruction_text ==
          kP2Hateful);
    CHECK(render_prompt(PromptId::P2, Concept::Offensive, kComment, defs).instruction_text ==
          kP2Offensive);
    CHECK(render_prompt(PromptId::P3, Concept::Toxic, kComment, defs).instruction_text == kP3Toxic);
    CHECK(render_prompt(PromptId::P1, Concept::Offensive, kComment, defs).instruction_text ==
          kP1Offensive);
    CHECK(render_prompt(PromptId::P5, Concept::Hateful, kComment, defs).instruction_text ==
          kP5Hateful);
}

TEST_CASE("render examples from the prompt catalog contract") {
    DefinitionSource defs = DefinitionSource::builtin();

    RenderedPrompt p2 = render_prompt(PromptId::P2, Concept::Hateful, kComment, defs);
    CHECK(p2.instruction_text.rfind(
              "I want you to perform a data annotation task. In your output, I want you to "
              "return either yes or no",
              0) == 0);
    CHECK(p2.instruction_text.ends_with(
        "Do not provide any other outputs or any explanation for your output."));

    RenderedPrompt p3 = render_prompt(PromptId::P3, Concept::Toxic, kComment, defs);
    CHECK(p3.instruction_text.find("provide a probability score between 0 to 1") !=
          std::string::npos);
    CHECK(p3.instruction_text.find("highly unlikely to be toxic") != std::string::npos);

    RenderedPrompt p1 = render_prompt(PromptId::P1, Concept::Offensive, kComment, defs);
    CHECK(p1.instruction_text.rfind("Do you think this comment is offensive?", 0) == 0);
    CHECK(p1.instruction_text.find("a. Yes") != std::string::npos);
    CHECK(p1.instruction_text.find("b. No") != std::string::npos);
}

TEST_CASE("rendering is pure and complete") {
    DefinitionSource defs = DefinitionSource::builtin();
    for (PromptId id : kAllPrompts) {
        for (Concept c : kAllConcepts) {
            RenderedPrompt a = render_prompt(id, c, kComment, defs);
            RenderedPrompt b = render_prompt(id, c, kComment, defs);
            CHECK(a.instruction_text == b.instruction_text);

            CHECK(a.instruction_text.find("<CONCEPT>") == std::string::npos);
            CHECK(a.instruction_text.find("<DEFINITION>") == std::string::npos);
            CHECK(a.instruction_text.find(concept_name(c)) != std::string::npos);
            // The full definition wording is spliced in.
            CHECK(a.instruction_text.find(defs.get(c).text) != std::string::npos);
            // Comment text rides separately for message assembly.
            CHECK(a.comment_text == kComment.text);
            CHECK(a.comment_id == kComment.id);
            CHECK(a.instruction_text.find(kComment.text) == std::string::npos);
        }
    }
}

TEST_CASE("missing definition is reported") {
    DefinitionSource defs = DefinitionSource::empty();
    CHECK_THROWS_AS(render_prompt(PromptId::P2, Concept::Hateful, kComment, defs), PromptError);
}

TEST_CASE("template overrides") {
    PromptCatalog catalog = PromptCatalog::builtin();
    catalog.apply_template_overrides(
        nlohmann::json{{"P2", "Rate <CONCEPT> using: <DEFINITION>"}});
    RenderedPrompt r =
        catalog.render(PromptId::P2, Concept::Toxic, kComment, DefinitionSource::builtin());
    CHECK(r.instruction_text.rfind("Rate toxic using:", 0) == 0);
    CHECK(r.instruction_text.find("rude, disrespectful") != std::string::npos);

    CHECK_THROWS_AS(catalog.apply_template_overrides(nlohmann::json{{"P9", "x"}}), PromptError);
}

TEST_CASE("template override file round-trip") {
    auto path = std::filesystem::temp_directory_path() /
                ("hot_prompt_override_" + std::to_string(::getpid()) + ".json");
    {
        std::ofstream out(path);
        out << R"({"P3": "Score <CONCEPT> given <DEFINITION>"})";
    }
    PromptCatalog catalog = PromptCatalog::builtin();
    catalog.apply_template_overrides_file(path);
    std::filesystem::remove(path);
    RenderedPrompt r =
        catalog.render(PromptId::P3, Concept::Hateful, kComment, DefinitionSource::builtin());
    CHECK(r.instruction_text.rfind("Score hateful given", 0) == 0);
    // Untouched templates keep their bodies.
    CHECK(catalog.get(PromptId::P2).body == builtin_catalog().get(PromptId::P2).body);

    CHECK_THROWS_AS(catalog.apply_template_overrides_file("/nonexistent/overrides.json"),
                    PromptError);
}

TEST_CASE("definition overrides flow into rendering") {
    DefinitionSource defs = DefinitionSource::builtin();
    defs.override_text(Concept::Toxic, "anything that derails a conversation");
    RenderedPrompt r = render_prompt(PromptId::P2, Concept::Toxic, kComment, defs);
    CHECK(r.instruction_text.find("anything that derails a conversation") != std::string::npos);
    CHECK(r.instruction_text.find("rude, disrespectful") == std::string::npos);

    DefinitionSource from_json = DefinitionSource::from_json(
        nlohmann::json{{"hateful", {{"text", "attacks a protected class"}, {"verb_phrase", true}}}});
    RenderedPrompt h = render_prompt(PromptId::P4, Concept::Hateful, kComment, from_json);
    CHECK(h.instruction_text.find("that it \"attacks a protected class.\"") != std::string::npos);

    // Plain-string overrides read as noun phrases ("that it is ...").
    DefinitionSource simple =
        DefinitionSource::from_json(nlohmann::json{{"toxic", "a conversation-derailing remark"}});
    RenderedPrompt t = render_prompt(PromptId::P2, Concept::Toxic, kComment, simple);
    CHECK(t.instruction_text.find("that it is \"a conversation-derailing remark.\"") !=
          std::string::npos);
    CHECK_THROWS_AS(DefinitionSource::from_json(nlohmann::json{{"sarcastic", "x"}}), PromptError);
}
