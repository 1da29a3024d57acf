// Generates the bundled synthetic fixtures: a 60-comment corpus with five
// rater votes per concept, and a replay cassette covering prompts P1..P5,
// the consistency grid (temperatures 0 and 1, iterations 0..2 for P2/P3),
// plus deliberate uncertain, multi-answer and missing-key items so the
// error-ledger paths stay exercised. Output is deterministic.

#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hot/corpus.hpp"
#include "hot/gateway.hpp"

using namespace hot;

namespace {

struct Item {
    Comment comment;
    std::array<std::vector<bool>, 3> votes;
    std::array<double, 3> model_score{};  // latent per-concept opinion
};

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

std::string compose_text(size_t i, std::mt19937& rng) {
    static const char* openers[] = {
        "Honestly,", "Look,", "I read the whole thread and", "After today's update,",
        "Not sure why, but", "From where I sit,", "For the record,", "Frankly,"};
    static const char* subjects[] = {
        "the committee", "this policy", "that reporter", "the moderators", "the new rule",
        "the city council", "the spokesperson", "this entire discussion"};
    static const char* verbs[] = {
        "completely missed the point", "did a reasonable job", "keeps ignoring the data",
        "should explain the decision", "made things worse for everyone",
        "deserves more credit than it gets", "won't convince anyone",
        "doesn't understand the issue"};
    static const char* tails[] = {
        "and people keep pretending otherwise.", "so maybe give it a rest.",
        "which is exactly what I expected.", "and that's being generous.",
        "but nobody asked me.", "full stop.", "and the replies prove it.",
        "even my neighbor agrees."};
    std::string text = std::string(openers[rng() % 8]) + " " + subjects[rng() % 8] + " " +
                       verbs[rng() % 8] + " " + tails[rng() % 8];
    if (i % 9 == 0) text += " LMAO.";
    if (i % 13 == 0) text += " Don't @ me.";
    return text;
}

// Special-case markers for cassette synthesis, keyed by comment index.
bool hedged_p1(size_t i, Concept c) {
    return (i == 7 && c == Concept::Offensive) || (i == 21 && c == Concept::Hateful) ||
           (i == 21 && c == Concept::Offensive) || (i == 44 && c == Concept::Toxic);
}
bool multi_p2(size_t i, Concept c) {
    return (i == 11 && c == Concept::Toxic) || (i == 29 && c == Concept::Hateful);
}
bool vague_p2(size_t i, Concept c) { return i == 50 && c == Concept::Offensive; }
bool missing_p2(size_t i, Concept c) {
    return (i == 13 && c == Concept::Offensive) || (i == 37 && c == Concept::Hateful);
}
bool multi_p3(size_t i, Concept c) { return i == 18 && c == Concept::Toxic; }
bool missing_p3(size_t i, Concept c) { return i == 41 && c == Concept::Offensive; }
bool percent_p3(size_t i, Concept c) { return i == 25 && c == Concept::Toxic; }
bool bare_int_p3(size_t i, Concept c) { return i == 46 && c == Concept::Toxic; }  // out of range
bool hedged_p4(size_t i, Concept c) {
    return (i == 7 && c == Concept::Offensive) || (i == 33 && c == Concept::Hateful);
}
bool multi_p4(size_t i, Concept c) { return i == 11 && c == Concept::Toxic; }
bool missing_p5(size_t i, Concept c) { return i == 52 && c == Concept::Hateful; }

std::string concept_str(Concept c) { return std::string(concept_name(c)); }

std::string yes_explanation(Concept c, uint64_t variant) {
    std::string body;
    switch (c) {
        case Concept::Hateful:
            body = "The comment expresses hatred towards a targeted group and is intended to be "
                   "derogatory, to humiliate the members of the group.";
            break;
        case Concept::Offensive:
            body = "The comment contains hurtful, derogatory, or obscene language directed at the "
                   "person being addressed, which can be perceived as offensive.";
            break;
        case Concept::Toxic:
            body = "The comment is rude, disrespectful, and is likely to make readers want to "
                   "leave the discussion.";
            break;
    }
    if (variant % 3 == 0) body += " Therefore, it can be considered " + concept_str(c) + ".";
    if (variant % 5 == 0) body = "Overall, the tone is confrontational. " + body;
    return body;
}

std::string no_explanation(Concept c, uint64_t variant) {
    std::string body;
    switch (c) {
        case Concept::Hateful:
            body = "The comment does not express hatred towards a targeted group or intend to be "
                   "derogatory, humiliate, or insult any members of a group.";
            break;
        case Concept::Offensive:
            body = "The comment does not contain any hurtful, derogatory, or obscene language.";
            break;
        case Concept::Toxic:
            body = "The comment does not contain any rude or disrespectful language that is "
                   "likely to make readers want to leave a discussion.";
            break;
    }
    if (variant % 4 == 0)
        body += " It is a statement of opinion rather than a personal attack.";
    return body;
}

std::string uncertain_explanation(Concept c) {
    return "It could be perceived as " + concept_str(c) +
           " by some readers, but it could also be interpreted as blunt criticism. The comment "
           "does not contain any explicit slurs.";
}

// Deterministic per-cell hash for stylistic variation and temp-1 jitter.
uint64_t cell_hash(const std::string& id, Concept c, int iteration, const char* tag) {
    return fnv1a64(id + "|" + concept_str(c) + "|" + std::to_string(iteration) + "|" + tag);
}

double quantize_score(double p, uint64_t variant) {
    if (p >= 0.92 && variant % 3 == 0) return 0.95;
    if (p <= 0.08 && variant % 3 == 0) return 0.05;
    double q = std::round(p * 10.0) / 10.0;
    return clamp01(q);
}

std::string format_score(double p) {
    if (p == 0.0) return "0";
    if (p == 1.0) return "1";
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", p);
    std::string s = buf;
    while (s.size() > 3 && s.back() == '0') s.pop_back();  // "0.80" -> "0.8"
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    std::filesystem::path out_dir = argc > 1 ? argv[1] : "data";
    std::filesystem::create_directories(out_dir);
    std::mt19937 rng(20230501);
    auto unit = [&] { return static_cast<double>(rng() % 1000) / 999.0; };

    // ------------------------------------------------------------------ corpus
    const std::array<double, 3> concept_offset{-0.32, -0.12, 0.02};
    const std::array<double, 3> model_bias{-0.02, 0.0, 0.10};  // toxic-prone model

    std::vector<Item> items;
    for (size_t i = 0; i < 60; ++i) {
        Item item;
        char id[8];
        std::snprintf(id, sizeof(id), "c%03zu", i + 1);
        item.comment.id = id;
        item.comment.platform = i % 17 == 0 ? Platform::Other
                                : i % 3 == 0 ? Platform::Reddit
                                : i % 3 == 1 ? Platform::Twitter
                                             : Platform::YouTube;
        item.comment.text = compose_text(i, rng);

        double base = unit();
        for (size_t c = 0; c < 3; ++c) {
            double score = clamp01(base + concept_offset[c] + (unit() - 0.5) * 0.45);
            item.votes[c].resize(5);
            for (int v = 0; v < 5; ++v) item.votes[c][v] = unit() < score;
            item.model_score[c] = clamp01(score + (unit() - 0.5) * 0.25 + model_bias[c]);
        }
        items.push_back(std::move(item));
    }

    {
        std::ofstream out(out_dir / "hot_corpus.jsonl");
        for (const auto& item : items) {
            nlohmann::json votes;
            for (Concept c : kAllConcepts)
                votes[concept_str(c)] = item.votes[concept_index(c)];
            nlohmann::json j{{"id", item.comment.id},
                             {"platform", std::string(platform_name(item.comment.platform))},
                             {"text", item.comment.text},
                             {"votes", votes}};
            out << j.dump() << '\n';
        }
    }

    // ---------------------------------------------------------------- cassette
    std::ofstream cas(out_dir / "cassette.jsonl");
    auto emit = [&](PromptId p, Concept c, const Item& item, int iteration, double temperature,
                    const std::string& text) {
        RequestParams params;
        params.temperature = temperature;
        RequestKey key{std::string(prompt_name(p)), concept_str(c), item.comment.id, iteration,
                       params.fingerprint()};
        nlohmann::json j{{"key", key.to_json()}, {"text", text}, {"ts", "2023-05-01T00:00:00Z"}};
        cas << j.dump() << '\n';
    };

    auto binary_answer = [&](const Item& item, Concept c, double threshold, int iteration,
                             double temperature) {
        bool yes = item.model_score[concept_index(c)] >= threshold;
        if (temperature > 0.5) {
            // Occasional flips at high temperature; iteration 0 keeps the base.
            uint64_t h = cell_hash(item.comment.id, c, iteration, "flip");
            if (iteration > 0 && h % 12 == 0) yes = !yes;
        }
        return yes;
    };

    auto prob_answer = [&](const Item& item, Concept c, int iteration, double temperature,
                           bool softened) {
        double p = item.model_score[concept_index(c)];
        if (softened) p = clamp01(p * 0.8 + 0.1);  // explanation runs avoid the extremes
        if (temperature > 0.5 && iteration > 0) {
            uint64_t h = cell_hash(item.comment.id, c, iteration, "jitter");
            if (h % 6 == 0) p = clamp01(p + (h % 2 == 0 ? 0.1 : -0.1));
        }
        return quantize_score(p, cell_hash(item.comment.id, c, 0, "quant"));
    };

    for (size_t i = 0; i < items.size(); ++i) {
        const Item& item = items[i];
        for (Concept c : kAllConcepts) {
            uint64_t style = cell_hash(item.comment.id, c, 0, "style");

            // P1: the MTurk-style question, temperature 0 only.
            if (hedged_p1(i, c)) {
                emit(PromptId::P1, c, item, 0, 0.0,
                     "As an AI language model, I cannot perceive emotions or feelings. However, "
                     "the comment can be considered " + concept_str(c) +
                         " by some readers as it is dismissive of their concerns.");
            } else {
                bool yes = binary_answer(item, c, 0.48, 0, 0.0);
                std::string text;
                if (yes)
                    text = style % 3 == 0 ? "Yes, the comment is " + concept_str(c) + "." : "Yes.";
                else
                    text = style % 3 == 0 ? "No, the comment is not " + concept_str(c) + "." : "No.";
                if (style % 4 == 0)
                    text += yes ? " It singles out the person being addressed."
                                : " It reads as ordinary disagreement.";
                emit(PromptId::P1, c, item, 0, 0.0, text);
            }

            // P2 / P3: temperature grid {0, 1}, iterations 0..2. Iterations at
            // temperature 0 repeat the base text verbatim.
            for (double temperature : {0.0, 1.0}) {
                for (int iteration = 0; iteration < 3; ++iteration) {
                    if (!missing_p2(i, c)) {
                        std::string text;
                        if (multi_p2(i, c)) {
                            text = "1. Yes\n2. No\n3. Yes";
                        } else if (vague_p2(i, c)) {
                            text = "It depends on the context of the conversation.";
                        } else {
                            text = binary_answer(item, c, 0.5, iteration, temperature) ? "Yes."
                                                                                       : "No.";
                        }
                        emit(PromptId::P2, c, item, iteration, temperature, text);
                    }
                    if (!missing_p3(i, c)) {
                        std::string text;
                        if (multi_p3(i, c)) {
                            text = "1. 0.2\n2. 0.7";
                        } else if (percent_p3(i, c)) {
                            text = "85%";
                        } else if (bare_int_p3(i, c)) {
                            text = "8";
                        } else {
                            text = format_score(prob_answer(item, c, iteration, temperature, false));
                        }
                        emit(PromptId::P3, c, item, iteration, temperature, text);
                    }
                }
            }

            // P4: binary with explanation, temperature 0 only.
            if (hedged_p4(i, c)) {
                emit(PromptId::P4, c, item, 0, 0.0,
                     "I cannot give a definitive answer for this comment.\n" +
                         uncertain_explanation(c));
            } else if (multi_p4(i, c)) {
                emit(PromptId::P4, c, item, 0, 0.0,
                     "1. Yes. The first sentence is dismissive.\n2. No. The second sentence is "
                     "neutral.");
            } else {
                // Explanation runs classify more readily as HOT.
                bool yes = binary_answer(item, c, 0.45, 0, 0.0);
                std::string explanation = yes ? yes_explanation(c, style) : no_explanation(c, style);
                std::string text = style % 5 == 1
                                       ? std::string(yes ? "Yes. " : "No. ") + explanation
                                       : std::string(yes ? "Yes.\n" : "No.\n") + explanation;
                emit(PromptId::P4, c, item, 0, 0.0, text);
            }

            // P5: probability with explanation, temperature 0 only.
            if (!missing_p5(i, c)) {
                double p = prob_answer(item, c, 0, 0.0, true);
                std::string explanation;
                if (p <= 0.2)
                    explanation = no_explanation(c, style);
                else if (p >= 0.8)
                    explanation = yes_explanation(c, style);
                else
                    explanation = uncertain_explanation(c);
                emit(PromptId::P5, c, item, 0, 0.0, format_score(p) + "\n" + explanation);
            }
        }
    }

    // Quick summary so regeneration is auditable.
    std::array<size_t, 3> majority_yes{};
    for (const auto& item : items)
        for (Concept c : kAllConcepts)
            if (majority_vote(item.votes[concept_index(c)])) ++majority_yes[concept_index(c)];
    std::cout << "wrote " << (out_dir / "hot_corpus.jsonl").string() << " (" << items.size()
              << " comments; majority-yes h/o/t = " << majority_yes[0] << "/" << majority_yes[1]
              << "/" << majority_yes[2] << ")\n";
    std::cout << "wrote " << (out_dir / "cassette.jsonl").string() << '\n';
    return 0;
}
