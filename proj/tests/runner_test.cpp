#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hot/runner.hpp"

using namespace hot;

namespace {

const std::string kDataDir = HOT_DATA_DIR;

ExperimentConfig replay_config(Experiment e) {
    ExperimentConfig cfg;
    cfg.experiment = e;
    cfg.backend = BackendMode::Replay;
    cfg.corpus_path = kDataDir + "/hot_corpus.jsonl";
    cfg.cassette_path = kDataDir + "/cassette.jsonl";
    return cfg;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("config validation") {
    SECTION("E3 with a single iteration is rejected") {
        ExperimentConfig cfg = replay_config(Experiment::E3);
        cfg.iterations = 1;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SECTION("prompt set is bound to the experiment") {
        ExperimentConfig cfg = replay_config(Experiment::E1);
        cfg.prompts = {PromptId::P2};
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg.prompts = {PromptId::P1};
        CHECK_NOTHROW(cfg.validate());
    }
    SECTION("mandated prompt sets") {
        CHECK(ExperimentConfig::mandated_prompts(Experiment::E1) ==
              std::vector<PromptId>{PromptId::P1});
        CHECK(ExperimentConfig::mandated_prompts(Experiment::E2) ==
              std::vector<PromptId>{PromptId::P2, PromptId::P3});
        CHECK(ExperimentConfig::mandated_prompts(Experiment::E4) ==
              std::vector<PromptId>{PromptId::P4, PromptId::P5});
        CHECK(ExperimentConfig::mandated_prompts(Experiment::Compare).size() == 5);
    }
    SECTION("unknown format rejected") {
        ExperimentConfig cfg = replay_config(Experiment::E2);
        cfg.formats = {"yaml"};
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SECTION("replay needs a cassette path") {
        ExperimentConfig cfg = replay_config(Experiment::E2);
        cfg.cassette_path.clear();
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
}

TEST_CASE("E2 replay run") {
    ExperimentConfig cfg = replay_config(Experiment::E2);
    ReportBundle bundle = run_experiment(cfg);

    SECTION("conservation: every item lands in exactly one category") {
        REQUIRE_FALSE(bundle.cells.empty());
        for (const auto& cell : bundle.cells)
            CHECK(cell.counts.total() == bundle.corpus_size);
    }
    SECTION("reports and sweeps have the expected shape") {
        // One thresholded or binary report per (prompt, concept).
        CHECK(bundle.reports.size() == 6);
        size_t p3_sweeps = 0;
        for (const auto& s : bundle.sweeps) {
            CHECK(s.prompt == PromptId::P3);
            CHECK(s.points.size() == 5);
            for (size_t k = 1; k < s.points.size(); ++k)
                CHECK(s.points[k].threshold > s.points[k - 1].threshold);
            ++p3_sweeps;
        }
        CHECK(p3_sweeps == 3);
        CHECK(bundle.histograms.size() == 3);  // P3 per concept
    }
    SECTION("score-level agreement tables are six rows per concept") {
        REQUIRE(bundle.score_agreements.size() == 3);
        for (const auto& s : bundle.score_agreements) {
            CHECK(s.prompt == PromptId::P3);
            REQUIRE(s.report.rows.size() == 6);
            CHECK(s.report.rows[0].class_label == "0.0");
            CHECK(s.report.rows[5].class_label == "1.0");
            size_t support = 0;
            for (const auto& row : s.report.rows) support += row.support;
            CHECK(support == s.report.total);
        }
    }
    SECTION("replay determinism: identical bundles on repeated runs") {
        ReportBundle again = run_experiment(cfg);
        CHECK(bundle.to_canonical_json().dump(2) == again.to_canonical_json().dump(2));
    }
    SECTION("bundle matches the frozen golden file byte for byte") {
        std::string golden = slurp(kDataDir + "/golden/e2_bundle.json");
        CHECK(bundle.to_canonical_json().dump(2) + "\n" == golden);
    }
    SECTION("bundled cassette exercises the failure categories") {
        size_t uncertain = 0, wrong = 0, failed = 0;
        for (const auto& cell : bundle.cells) {
            uncertain += cell.counts.uncertain;
            wrong += cell.counts.wrong_class;
            failed += cell.counts.failed;
        }
        CHECK(wrong > 0);
        CHECK(failed > 0);
        (void)uncertain;  // strict P2 folds hedges into wrong-class
    }
}

TEST_CASE("E1 replay run surfaces uncertain items") {
    ExperimentConfig cfg = replay_config(Experiment::E1);
    ReportBundle bundle = run_experiment(cfg);
    REQUIRE(bundle.outcome_summaries.size() == 3);
    size_t uncertain_total = 0;
    for (const auto& s : bundle.outcome_summaries) {
        CHECK(s.human_yes + s.human_no == bundle.corpus_size);
        uncertain_total += s.model_uncertain;
    }
    CHECK(uncertain_total > 0);
    for (const auto& cell : bundle.cells) CHECK(cell.counts.total() == bundle.corpus_size);
    // Reports cover only certain items.
    for (const auto& r : bundle.reports) {
        const RunCell* cell = nullptr;
        for (const auto& c : bundle.cells)
            if (c.prompt == r.prompt && c.target == r.target) cell = &c;
        REQUIRE(cell);
        CHECK(r.report.total == cell->counts.parsed);
    }
}

TEST_CASE("E3 replay: identical iterations give alpha exactly 1.0") {
    ExperimentConfig cfg = replay_config(Experiment::E3);
    cfg.temperatures = {0.0};
    cfg.iterations = 2;
    ReportBundle bundle = run_experiment(cfg);
    REQUIRE(bundle.alpha_rows.size() == 2);  // P2 and P3 at temperature 0
    for (const auto& row : bundle.alpha_rows) {
        for (Concept c : kAllConcepts) {
            REQUIRE(row.alpha[concept_index(c)].has_value());
            CHECK(*row.alpha[concept_index(c)] == 1.0);
        }
    }
}

TEST_CASE("E3 replay: full grid shows lower consistency at temperature 1") {
    ExperimentConfig cfg = replay_config(Experiment::E3);
    ReportBundle bundle = run_experiment(cfg);
    REQUIRE(bundle.alpha_rows.size() == 4);  // {P2,P3} x {0.0, 1.0}
    for (const auto& row : bundle.alpha_rows) {
        for (Concept c : kAllConcepts) {
            REQUIRE(row.alpha[concept_index(c)].has_value());
            double a = *row.alpha[concept_index(c)];
            CHECK(a <= 1.0);
            if (row.temperature == 0.0) {
                CHECK(a == 1.0);
            } else {
                CHECK(a < 1.0);
                CHECK(a > 0.5);
            }
        }
    }
}

TEST_CASE("E4 replay run") {
    ExperimentConfig cfg = replay_config(Experiment::E4);
    ReportBundle bundle = run_experiment(cfg);

    SECTION("venn totals account for every non-excluded item") {
        REQUIRE(bundle.venn.has_value());
        CHECK(bundle.venn->total() + bundle.venn_excluded == bundle.corpus_size);
        CHECK(bundle.venn_excluded > 0);  // hedged + multi-answer fixtures
    }
    SECTION("the multi-answer item is ledgered as wrong class and excluded") {
        const RunCell* cell = nullptr;
        for (const auto& c : bundle.cells)
            if (c.prompt == PromptId::P4 && c.target == Concept::Toxic) cell = &c;
        REQUIRE(cell);
        bool found = false;
        for (const auto& e : cell->items)
            if (e.comment_id == "c012") {
                CHECK(e.category == ItemCategory::WrongClass);
                found = true;
            }
        CHECK(found);
    }
    SECTION("certainty bins and ngram groups populated") {
        CHECK(bundle.certainty.size() == 3);
        for (const auto& c : bundle.certainty) CHECK(c.unlikely + c.uncertain + c.likely > 0);
        REQUIRE_FALSE(bundle.ngram_groups.empty());
        bool has_concept_group = false, has_outcome_group = false, has_bin_group = false;
        for (const auto& g : bundle.ngram_groups) {
            if (g.group == "P4/hateful") has_concept_group = true;
            if (g.group == "P4/yes" || g.group == "P4/no") has_outcome_group = true;
            if (g.group.rfind("P5/", 0) == 0 &&
                (g.group.ends_with("likely") || g.group.ends_with("uncertain")))
                has_bin_group = true;
            REQUIRE(g.tables.size() == 3);
            CHECK(g.tables[0].n == 3);
            CHECK(g.tables[2].n == 5);
            for (const auto& t : g.tables)
                for (const auto& e : t.entries) CHECK(e.tokens.size() == static_cast<size_t>(t.n));
        }
        CHECK(has_concept_group);
        CHECK(has_outcome_group);
        CHECK(has_bin_group);
    }
    SECTION("manual-reading samples are seeded and reproducible") {
        REQUIRE(bundle.samples.size() == 3);
        ReportBundle again = run_experiment(cfg);
        for (size_t i = 0; i < bundle.samples.size(); ++i)
            CHECK(bundle.samples[i].comment_ids == again.samples[i].comment_ids);

        ExperimentConfig reseeded = cfg;
        reseeded.seed = 1337;
        ReportBundle other = run_experiment(reseeded);
        bool any_diff = false;
        for (size_t i = 0; i < bundle.samples.size(); ++i)
            if (bundle.samples[i].comment_ids != other.samples[i].comment_ids) any_diff = true;
        // Cells are small; a differing sample only proves the seed is wired
        // through when the cell has more members than the sample size.
        bool any_large = false;
        for (const auto& s : bundle.samples)
            if (s.comment_ids.size() == cfg.sample_k) any_large = true;
        if (any_large) CHECK(any_diff);
    }
}

TEST_CASE("compare experiment covers all five prompts") {
    ExperimentConfig cfg = replay_config(Experiment::Compare);
    ReportBundle bundle = run_experiment(cfg);
    std::set<PromptId> seen;
    for (const auto& row : bundle.compare) seen.insert(row.prompt);
    CHECK(seen.size() == 5);
    CHECK(bundle.thresholds.get(Concept::Hateful) == 0.7);
    CHECK(bundle.thresholds.get(Concept::Offensive) == 0.7);
    CHECK(bundle.thresholds.get(Concept::Toxic) == 0.9);
    for (const auto& cell : bundle.cells) CHECK(cell.counts.total() == bundle.corpus_size);
}

TEST_CASE("compare_prompts over bundles") {
    ExperimentConfig cfg = replay_config(Experiment::E2);
    ReportBundle e2 = run_experiment(cfg);
    ExperimentConfig cfg4 = replay_config(Experiment::E4);
    ReportBundle e4 = run_experiment(cfg4);

    SECTION("grid combines prompts from both bundles") {
        auto grid = compare_prompts({e2, e4});
        std::set<PromptId> prompts;
        for (const auto& row : grid) prompts.insert(row.prompt);
        CHECK(prompts ==
              std::set<PromptId>{PromptId::P2, PromptId::P3, PromptId::P4, PromptId::P5});
    }
    SECTION("bundle order does not matter") {
        auto a = compare_prompts({e2, e4});
        auto b = compare_prompts({e4, e2});
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].prompt == b[i].prompt);
            CHECK(a[i].class_label == b[i].class_label);
            CHECK(a[i].support == b[i].support);
        }
    }
    SECTION("identical bundles collapse to identical rows") {
        auto once = compare_prompts({e2, e4});
        auto twice = compare_prompts({e2, e4, e2});
        CHECK(once.size() == twice.size());
    }
    SECTION("corpus mismatch is rejected") {
        ReportBundle drifted = e4;
        drifted.corpus_fingerprint = "deadbeefdeadbeef";
        CHECK_THROWS_AS(compare_prompts({e2, drifted}), CorpusMismatch);
    }
    SECTION("a single prompt is not comparable") {
        ReportBundle only_p2 = e2;
        only_p2.reports.erase(
            std::remove_if(only_p2.reports.begin(), only_p2.reports.end(),
                           [](const ConceptReport& r) { return r.prompt != PromptId::P2; }),
            only_p2.reports.end());
        CHECK_THROWS_AS(compare_prompts({only_p2}), CorpusMismatch);
    }
}

TEST_CASE("emit_report writes stable files") {
    ExperimentConfig cfg = replay_config(Experiment::E2);
    ReportBundle bundle = run_experiment(cfg);
    auto out_dir = std::filesystem::temp_directory_path() /
                   ("hot_runner_emit_" + std::to_string(::getpid()));
    std::filesystem::remove_all(out_dir);

    auto written = emit_report(bundle, {"json", "csv", "markdown"}, out_dir);
    REQUIRE(written.size() == 4);  // bundle.json, reports.csv, histograms.csv, bundle.md
    std::string first = slurp(out_dir / "bundle.json");
    emit_report(bundle, {"json"}, out_dir);
    CHECK(slurp(out_dir / "bundle.json") == first);

    std::string csv = slurp(out_dir / "reports.csv");
    CHECK(csv.rfind("Category,Class,Support,Precision,Recall,F1-score,Accuracy", 0) == 0);

    std::string md = slurp(out_dir / "bundle.md");
    CHECK(md.find("## Error ledger") != std::string::npos);
    std::filesystem::remove_all(out_dir);
}
