#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "hot/corpus.hpp"

using namespace hot;

namespace {

struct TempFile {
    std::filesystem::path path;
    explicit TempFile(const std::string& content) {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("hot_corpus_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) +
                ".jsonl");
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::filesystem::remove(path); }
};

const char* kValidThreeLines =
    R"({"id":"c1","platform":"reddit","text":"first comment","votes":{"hateful":[true,true,true,false,false],"offensive":[false,false,false,false,false],"toxic":[true,true,true,true,true]}})"
    "\n"
    R"({"id":"c2","platform":"twitter","text":"second comment","votes":{"hateful":[false,false,false],"offensive":[true,true,false],"toxic":[false,true,false]}})"
    "\n"
    R"({"id":"c3","platform":"youtube","text":"third comment","votes":{"hateful":[false],"offensive":[true],"toxic":[false]}})"
    "\n";

}  // namespace

TEST_CASE("majority_vote threshold") {
    CHECK(majority_vote({true, true, true, false, false}));
    CHECK_FALSE(majority_vote({false, false, false, false, false}));
    CHECK_FALSE(majority_vote({true, true, false, false, false}));
    CHECK(majority_vote({true}));

    CHECK_THROWS_AS(majority_vote({}), VoteError);
    CHECK_THROWS_AS(majority_vote({true, false}), VoteError);
}

TEST_CASE("majority_vote properties") {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        size_t arity = 1 + 2 * (rng() % 5);  // odd, 1..9
        std::vector<bool> votes(arity);
        for (size_t i = 0; i < arity; ++i) votes[i] = rng() % 2 == 0;

        bool base = majority_vote(votes);

        // Permutation invariance.
        std::vector<bool> shuffled = votes;
        for (size_t i = shuffled.size(); i > 1; --i)
            std::swap(shuffled[i - 1], shuffled[rng() % i]);
        CHECK(majority_vote(shuffled) == base);

        // Odd-arity complement duality.
        std::vector<bool> complement(arity);
        for (size_t i = 0; i < arity; ++i) complement[i] = !votes[i];
        CHECK(majority_vote(complement) == !base);

        // Threshold identity: true iff true-count >= ceil((n+1)/2).
        size_t trues = static_cast<size_t>(std::count(votes.begin(), votes.end(), true));
        CHECK(base == (trues >= (arity + 1) / 2));
    }
}

TEST_CASE("concept definitions carry the reference wording") {
    CHECK(concept_definition(Concept::Hateful).text.rfind("expresses hatred towards a targeted group",
                                                          0) == 0);
    CHECK(concept_definition(Concept::Offensive).text ==
          "contains hurtful, derogatory, or obscene comments");
    CHECK(concept_definition(Concept::Toxic).text.find(
              "likely to make readers want to leave a discussion") != std::string::npos);
}

TEST_CASE("concept ordering is canonical") {
    CHECK(concept_index(Concept::Hateful) == 0);
    CHECK(concept_index(Concept::Offensive) == 1);
    CHECK(concept_index(Concept::Toxic) == 2);
    CHECK(kAllConcepts.size() == 3);
}

TEST_CASE("load_corpus") {
    SECTION("valid three-line file") {
        TempFile file(kValidThreeLines);
        Corpus corpus = load_corpus(file.path);
        REQUIRE(corpus.size() == 3);
        CHECK(corpus.metadata.record_count == 3);
        CHECK(corpus.records[0].comment.platform == Platform::Reddit);
        // Majority labels derived at load: 3/5 hateful true, toxic unanimous.
        CHECK(corpus.records[0].majority_for(Concept::Hateful));
        CHECK_FALSE(corpus.records[0].majority_for(Concept::Offensive));
        CHECK(corpus.records[0].majority_for(Concept::Toxic));
        CHECK(corpus.records[1].votes_for(Concept::Hateful).size() == 3);
    }
    SECTION("vote arity mismatch across concepts") {
        TempFile file(
            R"({"id":"c1","platform":"reddit","text":"x","votes":{"hateful":[true,true,true,false,false],"offensive":[true,true,true,false,false],"toxic":[true,true,true,false]}})"
            "\n");
        try {
            load_corpus(file.path);
            FAIL("expected VoteArityMismatch");
        } catch (const CorpusError& e) {
            CHECK(e.kind == CorpusError::Kind::VoteArityMismatch);
            CHECK(e.record_id == "c1");
        }
    }
    SECTION("even vote count rejected") {
        TempFile file(
            R"({"id":"c1","platform":"reddit","text":"x","votes":{"hateful":[true,true],"offensive":[true,true],"toxic":[true,true]}})"
            "\n");
        try {
            load_corpus(file.path);
            FAIL("expected VoteArityMismatch");
        } catch (const CorpusError& e) {
            CHECK(e.kind == CorpusError::Kind::VoteArityMismatch);
        }
    }
    SECTION("duplicate id") {
        TempFile file(
            R"({"id":"c1","platform":"reddit","text":"x","votes":{"hateful":[true],"offensive":[true],"toxic":[true]}})"
            "\n"
            R"({"id":"c1","platform":"twitter","text":"y","votes":{"hateful":[false],"offensive":[false],"toxic":[false]}})"
            "\n");
        try {
            load_corpus(file.path);
            FAIL("expected DuplicateId");
        } catch (const CorpusError& e) {
            CHECK(e.kind == CorpusError::Kind::DuplicateId);
            CHECK(e.record_id == "c1");
        }
    }
    SECTION("malformed line reports its line number") {
        TempFile file(
            R"({"id":"c1","platform":"reddit","text":"x","votes":{"hateful":[true],"offensive":[true],"toxic":[true]}})"
            "\nnot json at all\n");
        try {
            load_corpus(file.path);
            FAIL("expected MalformedLine");
        } catch (const CorpusError& e) {
            CHECK(e.kind == CorpusError::Kind::MalformedLine);
            CHECK(e.line == 2);
        }
    }
    SECTION("empty text rejected") {
        TempFile file(
            R"({"id":"c1","platform":"reddit","text":"   ","votes":{"hateful":[true],"offensive":[true],"toxic":[true]}})"
            "\n");
        CHECK_THROWS_AS(load_corpus(file.path), CorpusError);
    }
    SECTION("missing file") {
        try {
            load_corpus("/nonexistent/really_not_here.jsonl");
            FAIL("expected FileNotFound");
        } catch (const CorpusError& e) {
            CHECK(e.kind == CorpusError::Kind::FileNotFound);
        }
    }
}

TEST_CASE("corpus round-trips through save and load") {
    TempFile file(kValidThreeLines);
    Corpus original = load_corpus(file.path);

    auto copy_path = std::filesystem::temp_directory_path() /
                     ("hot_corpus_roundtrip_" + std::to_string(::getpid()) + ".jsonl");
    save_corpus(original, copy_path);
    Corpus reloaded = load_corpus(copy_path);
    std::filesystem::remove(copy_path);

    REQUIRE(reloaded.size() == original.size());
    for (size_t i = 0; i < original.size(); ++i) {
        CHECK(reloaded.records[i].comment.id == original.records[i].comment.id);
        CHECK(reloaded.records[i].comment.platform == original.records[i].comment.platform);
        CHECK(reloaded.records[i].comment.text == original.records[i].comment.text);
        CHECK(reloaded.records[i].votes == original.records[i].votes);
        CHECK(reloaded.records[i].majority == original.records[i].majority);
    }
    CHECK(corpus_fingerprint(reloaded) == corpus_fingerprint(original));
}

TEST_CASE("corpus fingerprint ignores record order but not content") {
    TempFile file(kValidThreeLines);
    Corpus corpus = load_corpus(file.path);
    Corpus reordered = corpus;
    std::reverse(reordered.records.begin(), reordered.records.end());
    CHECK(corpus_fingerprint(reordered) == corpus_fingerprint(corpus));

    Corpus edited = corpus;
    edited.records[0].comment.text += "!";
    CHECK(corpus_fingerprint(edited) != corpus_fingerprint(corpus));
}
