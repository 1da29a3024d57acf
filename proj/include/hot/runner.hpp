#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hot/corpus.hpp"
#include "hot/gateway.hpp"
#include "hot/metrics.hpp"
#include "hot/parser.hpp"
#include "hot/prompts.hpp"
#include "hot/reasoning.hpp"

namespace hot {

enum class Experiment { E1, E2, E3, E4, Compare };

inline std::string_view experiment_name(Experiment e) {
    switch (e) {
        case Experiment::E1: return "E1";
        case Experiment::E2: return "E2";
        case Experiment::E3: return "E3";
        case Experiment::E4: return "E4";
        case Experiment::Compare: return "compare";
    }
    return "";
}

inline std::optional<Experiment> experiment_from_string(std::string_view s) {
    std::string v = to_lower(trim_view(s));
    if (v == "1" || v == "e1") return Experiment::E1;
    if (v == "2" || v == "e2") return Experiment::E2;
    if (v == "3" || v == "e3") return Experiment::E3;
    if (v == "4" || v == "e4") return Experiment::E4;
    if (v == "compare") return Experiment::Compare;
    return std::nullopt;
}

enum class BackendMode { Live, Record, Replay };

inline std::string_view backend_mode_name(BackendMode m) {
    switch (m) {
        case BackendMode::Live: return "live";
        case BackendMode::Record: return "record";
        case BackendMode::Replay: return "replay";
    }
    return "";
}

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    Experiment experiment = Experiment::E2;
    std::vector<PromptId> prompts;                    // empty -> mandated set
    std::vector<Concept> concepts{kAllConcepts.begin(), kAllConcepts.end()};
    RequestParams params;
    std::vector<double> temperatures{0.0, 1.0};       // consistency grid (E3)
    int iterations = 3;                               // repeats per setting (E3)
    ThresholdConfig thresholds;                       // 0.7 / 0.7 / 0.9 defaults
    Scale probability_alpha_scale = Scale::Interval;  // E3 scale for score outputs
    BackendMode backend = BackendMode::Replay;
    uint64_t seed = 42;
    int concurrency = 4;
    size_t ngram_top_k = 5;
    size_t sample_k = 10;
    double histogram_bin_width = 0.05;
    std::vector<double> sweep_thresholds{0.5, 0.6, 0.7, 0.8, 0.9};
    std::filesystem::path corpus_path;
    std::filesystem::path cassette_path;
    std::filesystem::path out_dir;
    LiveConfig live;
    RetryPolicy retry;
    std::vector<std::string> formats{"json"};
    DefinitionSource definitions = DefinitionSource::builtin();
    PromptCatalog catalog = PromptCatalog::builtin();

    static std::vector<PromptId> mandated_prompts(Experiment e) {
        switch (e) {
            case Experiment::E1: return {PromptId::P1};
            case Experiment::E2: return {PromptId::P2, PromptId::P3};
            case Experiment::E3: return {PromptId::P2, PromptId::P3};
            case Experiment::E4: return {PromptId::P4, PromptId::P5};
            case Experiment::Compare:
                return {PromptId::P1, PromptId::P2, PromptId::P3, PromptId::P4, PromptId::P5};
        }
        return {};
    }

    std::vector<PromptId> effective_prompts() const {
        if (prompts.empty()) return mandated_prompts(experiment);
        return prompts;
    }

    void validate() const {
        std::vector<PromptId> mandated = mandated_prompts(experiment);
        if (!prompts.empty()) {
            std::vector<PromptId> given = prompts, want = mandated;
            std::sort(given.begin(), given.end());
            std::sort(want.begin(), want.end());
            if (given != want)
                throw ConfigError("experiment " + std::string(experiment_name(experiment)) +
                                  " runs a fixed prompt set; remove --prompts or pass exactly that set");
        }
        if (concepts.empty()) throw ConfigError("at least one concept required");
        {
            std::set<Concept> dedup(concepts.begin(), concepts.end());
            if (dedup.size() != concepts.size()) throw ConfigError("duplicate concepts");
        }
        if (experiment == Experiment::E3) {
            if (iterations < 2)
                throw ConfigError("experiment 3 needs at least 2 iterations (alpha needs 2 observers)");
            if (temperatures.empty()) throw ConfigError("experiment 3 needs a temperature grid");
        } else if (iterations < 1) {
            throw ConfigError("iterations must be >= 1");
        }
        for (double t : temperatures)
            if (t < 0.0 || t > 2.0) throw ConfigError("temperature outside [0,2]");
        if (concurrency < 1) throw ConfigError("concurrency must be >= 1");
        if (!(histogram_bin_width > 0.0) || histogram_bin_width > 1.0)
            throw ConfigError("histogram bin width outside (0,1]");
        try {
            params.validate();
            thresholds.validate();
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        for (const auto& f : formats)
            if (f != "json" && f != "csv" && f != "markdown")
                throw ConfigError("unknown output format \"" + f + "\"");
        if (corpus_path.empty()) throw ConfigError("corpus path required");
        if (backend != BackendMode::Live && cassette_path.empty())
            throw ConfigError("cassette path required for record/replay backends");
    }
};

// ---------------------------------------------------------------------------
// Run cells and ledger
// ---------------------------------------------------------------------------

// Every corpus item lands in exactly one category per (prompt, concept) run.
enum class ItemCategory { Parsed, Uncertain, WrongClass, Failed };

inline std::string_view item_category_name(ItemCategory c) {
    switch (c) {
        case ItemCategory::Parsed: return "parsed";
        case ItemCategory::Uncertain: return "uncertain";
        case ItemCategory::WrongClass: return "wrong_class";
        case ItemCategory::Failed: return "failed";
    }
    return "";
}

struct LedgerEntry {
    std::string comment_id;
    ItemCategory category = ItemCategory::Failed;
    std::string detail;               // parse/gateway failure description
    std::optional<bool> label;        // binary outcome, true = yes
    std::optional<double> probability;
    std::optional<std::string> explanation;
    bool truth = false;               // majority label for the run's concept
};

struct CellCounts {
    size_t parsed = 0, uncertain = 0, wrong_class = 0, failed = 0;
    size_t total() const { return parsed + uncertain + wrong_class + failed; }
};

// One batch over the corpus: a (prompt, concept, temperature, iteration)
// combination.
struct RunCell {
    PromptId prompt{};
    Concept target{};
    double temperature = 0.0;
    int iteration = 0;
    CellCounts counts;
    std::vector<LedgerEntry> items;  // corpus order
};

struct ConceptReport {
    PromptId prompt{};
    Concept target{};
    ClassificationReport report;
};

struct ConceptSweep {
    PromptId prompt{};
    Concept target{};
    std::vector<SweepPoint> points;
};

// Fig-2-style outcome tally for the MTurk-style prompt.
struct OutcomeSummary {
    Concept target{};
    size_t model_yes = 0, model_no = 0, model_uncertain = 0;
    size_t human_yes = 0, human_no = 0;
};

struct AlphaRow {
    PromptId prompt{};
    double temperature = 0.0;
    std::array<std::optional<double>, 3> alpha;  // by concept index
    std::array<bool, 3> degenerate{};
};

struct CertaintyCounts {
    Concept target{};
    size_t unlikely = 0, uncertain = 0, likely = 0;
};

struct ConceptHistogram {
    PromptId prompt{};
    Concept target{};
    std::vector<HistogramBin> bins;
};

struct NgramGroup {
    std::string group;  // e.g. "P4/hateful", "P4/yes", "P5/likely"
    std::vector<NgramTable> tables;  // n = 3, 4, 5
};

struct CellSample {
    std::array<bool, 3> cell{};
    std::vector<std::string> comment_ids;
};

struct CompareRow {
    PromptId prompt{};
    Concept target{};
    std::string class_label;
    size_t support = 0;
    std::optional<double> precision, recall, f1;
    double accuracy = 0.0;
};

// Six-row score-level comparison: binned model probabilities against the
// 0.2-per-vote rater score.
struct ScoreAgreement {
    PromptId prompt{};
    Concept target{};
    ClassificationReport report;
};

struct ReportBundle {
    Experiment experiment = Experiment::E2;
    std::string corpus_fingerprint;
    std::string params_fingerprint;
    size_t corpus_size = 0;
    std::vector<PromptId> prompts;
    std::vector<Concept> concepts;
    int iterations = 1;
    std::vector<double> temperatures;
    ThresholdConfig thresholds;
    Scale probability_alpha_scale = Scale::Interval;
    uint64_t seed = 42;
    std::string backend;

    std::vector<RunCell> cells;
    std::vector<ConceptReport> reports;
    std::vector<ConceptSweep> sweeps;
    std::vector<ScoreAgreement> score_agreements;     // E2, probability prompts
    std::vector<OutcomeSummary> outcome_summaries;    // E1
    std::vector<AlphaRow> alpha_rows;                 // E3
    std::optional<VennPartition> venn;                // E4 (P4 labels)
    size_t venn_excluded = 0;
    std::vector<CertaintyCounts> certainty;           // E4 (P5 scores)
    std::vector<ConceptHistogram> histograms;         // probability prompts
    std::vector<NgramGroup> ngram_groups;             // E4
    std::vector<CellSample> samples;                  // E4 manual-reading samples
    std::vector<CompareRow> compare;                  // Compare

    nlohmann::json to_canonical_json() const;
};

struct CorpusMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// JSON assembly (canonical: object keys sort lexicographically, arrays are
// built in deterministic order, no timestamps or machine-local paths)
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json ledger_entry_json(const LedgerEntry& e) {
    nlohmann::json j{{"comment_id", e.comment_id},
                     {"category", std::string(item_category_name(e.category))},
                     {"truth", e.truth}};
    if (!e.detail.empty()) j["detail"] = e.detail;
    if (e.label) j["label"] = *e.label ? "yes" : "no";
    if (e.probability) j["probability"] = *e.probability;
    if (e.explanation) j["explanation"] = *e.explanation;
    return j;
}

inline nlohmann::json venn_json(const VennPartition& venn) {
    nlohmann::json rows = nlohmann::json::array();
    for (size_t idx = 0; idx < 8; ++idx) {
        rows.push_back({{"hateful", (idx & 4u) != 0},
                        {"offensive", (idx & 2u) != 0},
                        {"toxic", (idx & 1u) != 0},
                        {"count", venn.counts[idx]}});
    }
    return rows;
}

inline nlohmann::json ngram_table_json(const NgramTable& table) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : table.entries)
        entries.push_back({{"tokens", e.tokens}, {"count", e.count}});
    return {{"n", table.n}, {"entries", entries}, {"tokenizer", table.tokenizer_id}};
}

}  // namespace detail

inline nlohmann::json ReportBundle::to_canonical_json() const {
    nlohmann::json j;

    nlohmann::json prompts_json = nlohmann::json::array();
    for (PromptId p : prompts) prompts_json.push_back(std::string(prompt_name(p)));
    nlohmann::json concepts_json = nlohmann::json::array();
    for (Concept c : concepts) concepts_json.push_back(std::string(concept_name(c)));
    nlohmann::json thresholds_json;
    for (Concept c : kAllConcepts)
        thresholds_json[std::string(concept_name(c))] = thresholds.get(c);

    j["config"] = {{"experiment", std::string(experiment_name(experiment))},
                   {"backend", backend},
                   {"prompts", prompts_json},
                   {"concepts", concepts_json},
                   {"iterations", iterations},
                   {"temperatures", temperatures},
                   {"thresholds", thresholds_json},
                   {"probability_alpha_scale", std::string(scale_name(probability_alpha_scale))},
                   {"seed", seed},
                   {"corpus_fingerprint", corpus_fingerprint},
                   {"params_fingerprint", params_fingerprint}};
    j["corpus_size"] = corpus_size;

    nlohmann::json runs = nlohmann::json::array();
    for (const auto& cell : cells) {
        nlohmann::json items = nlohmann::json::array();
        for (const auto& e : cell.items) items.push_back(detail::ledger_entry_json(e));
        runs.push_back({{"prompt", std::string(prompt_name(cell.prompt))},
                        {"concept", std::string(concept_name(cell.target))},
                        {"temperature", cell.temperature},
                        {"iteration", cell.iteration},
                        {"counts",
                         {{"parsed", cell.counts.parsed},
                          {"uncertain", cell.counts.uncertain},
                          {"wrong_class", cell.counts.wrong_class},
                          {"failed", cell.counts.failed}}},
                        {"items", items}});
    }
    j["runs"] = runs;

    nlohmann::json reports_json = nlohmann::json::array();
    for (const auto& r : reports)
        reports_json.push_back({{"prompt", std::string(prompt_name(r.prompt))},
                                {"concept", std::string(concept_name(r.target))},
                                {"report", report_to_json(r.report)}});
    j["reports"] = reports_json;

    if (!sweeps.empty()) {
        nlohmann::json sweeps_json = nlohmann::json::array();
        for (const auto& s : sweeps) {
            nlohmann::json points = nlohmann::json::array();
            for (const auto& p : s.points)
                points.push_back({{"threshold", p.threshold}, {"report", report_to_json(p.report)}});
            sweeps_json.push_back({{"prompt", std::string(prompt_name(s.prompt))},
                                   {"concept", std::string(concept_name(s.target))},
                                   {"points", points}});
        }
        j["sweeps"] = sweeps_json;
    }

    if (!score_agreements.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& s : score_agreements)
            rows.push_back({{"prompt", std::string(prompt_name(s.prompt))},
                            {"concept", std::string(concept_name(s.target))},
                            {"report", report_to_json(s.report)}});
        j["score_agreement"] = rows;
    }

    if (!outcome_summaries.empty()) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& s : outcome_summaries)
            out.push_back({{"concept", std::string(concept_name(s.target))},
                           {"model_yes", s.model_yes},
                           {"model_no", s.model_no},
                           {"model_uncertain", s.model_uncertain},
                           {"human_yes", s.human_yes},
                           {"human_no", s.human_no}});
        j["outcome_summary"] = out;
    }

    if (!alpha_rows.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : alpha_rows) {
            nlohmann::json by_concept;
            for (Concept c : kAllConcepts) {
                const auto& a = row.alpha[concept_index(c)];
                by_concept[std::string(concept_name(c))] =
                    a ? nlohmann::json(*a) : nlohmann::json(nullptr);
            }
            rows.push_back({{"prompt", std::string(prompt_name(row.prompt))},
                            {"temperature", row.temperature},
                            {"alpha", by_concept},
                            {"degenerate",
                             {{"hateful", row.degenerate[0]},
                              {"offensive", row.degenerate[1]},
                              {"toxic", row.degenerate[2]}}}});
        }
        j["alpha"] = rows;
    }

    if (venn) {
        j["venn"] = {{"cells", detail::venn_json(*venn)},
                     {"total", venn->total()},
                     {"excluded", venn_excluded}};
    }

    if (!certainty.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& c : certainty)
            rows.push_back({{"concept", std::string(concept_name(c.target))},
                            {"unlikely", c.unlikely},
                            {"uncertain", c.uncertain},
                            {"likely", c.likely}});
        j["certainty"] = rows;
    }

    if (!histograms.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& h : histograms) {
            nlohmann::json bins = nlohmann::json::array();
            for (const auto& b : h.bins)
                bins.push_back({{"start", b.start}, {"count", b.count}});
            rows.push_back({{"prompt", std::string(prompt_name(h.prompt))},
                            {"concept", std::string(concept_name(h.target))},
                            {"bins", bins}});
        }
        j["histograms"] = rows;
    }

    if (!ngram_groups.empty()) {
        nlohmann::json groups = nlohmann::json::array();
        for (const auto& g : ngram_groups) {
            nlohmann::json tables = nlohmann::json::array();
            for (const auto& t : g.tables) tables.push_back(detail::ngram_table_json(t));
            groups.push_back({{"group", g.group}, {"tables", tables}});
        }
        j["ngrams"] = groups;
    }

    if (!samples.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& s : samples)
            rows.push_back({{"hateful", s.cell[0]},
                            {"offensive", s.cell[1]},
                            {"toxic", s.cell[2]},
                            {"comment_ids", s.comment_ids}});
        j["samples"] = rows;
    }

    if (!compare.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : compare)
            rows.push_back({{"prompt", std::string(prompt_name(r.prompt))},
                            {"concept", std::string(concept_name(r.target))},
                            {"class", r.class_label},
                            {"support", r.support},
                            {"precision", metric_json(r.precision)},
                            {"recall", metric_json(r.recall)},
                            {"f1", metric_json(r.f1)},
                            {"accuracy", r.accuracy}});
        j["compare"] = rows;
    }

    return j;
}

// ---------------------------------------------------------------------------
// Experiment execution
// ---------------------------------------------------------------------------

namespace detail {

inline ParseMode parse_mode_for(const PromptTemplate& tpl) {
    // Bare binary prompts are parsed strictly; the MTurk-style question and
    // explanation-bearing prompts admit hedged prose, hence lenient.
    if (tpl.output_kind == OutputKind::Binary && !tpl.wants_explanation) return ParseMode::Strict;
    return ParseMode::Lenient;
}

inline LedgerEntry parse_item(const PromptTemplate& tpl, const AnnotateResult& result,
                              const AnnotationRecord& rec, Concept target) {
    LedgerEntry entry;
    entry.comment_id = rec.comment.id;
    entry.truth = rec.majority_for(target);

    if (!is_ok(result)) {
        const auto& err = std::get<GatewayError>(result);
        entry.category = ItemCategory::Failed;
        entry.detail = std::string(gateway_error_name(err.kind));
        return entry;
    }
    const std::string& text = std::get<RawResponse>(result).text;

    if (tpl.output_kind == OutputKind::Probability) {
        ProbabilityParse parsed = parse_probability(text);
        if (auto* failure = std::get_if<ParseFailure>(&parsed)) {
            entry.category = failure->reason == ParseFailure::Reason::WrongClass
                                 ? ItemCategory::WrongClass
                                 : ItemCategory::Failed;
            entry.detail = std::string(parse_failure_name(failure->reason));
            return entry;
        }
        auto& out = std::get<ParsedOutput>(parsed);
        entry.category = ItemCategory::Parsed;
        entry.probability = out.probability;
        if (tpl.wants_explanation && out.explanation) entry.explanation = std::move(out.explanation);
        return entry;
    }

    BinaryParse parsed = parse_binary(text, parse_mode_for(tpl));
    if (auto* failure = std::get_if<ParseFailure>(&parsed)) {
        entry.category = failure->reason == ParseFailure::Reason::WrongClass
                             ? ItemCategory::WrongClass
                             : ItemCategory::Failed;
        entry.detail = std::string(parse_failure_name(failure->reason));
        return entry;
    }
    BinaryOutcome outcome = std::get<BinaryOutcome>(parsed);
    if (outcome == BinaryOutcome::Uncertain) {
        entry.category = ItemCategory::Uncertain;
        return entry;
    }
    entry.category = ItemCategory::Parsed;
    entry.label = outcome == BinaryOutcome::Yes;
    if (tpl.wants_explanation) {
        SplitResult split = split_explanation(text);
        if (auto* answer = std::get_if<SplitAnswer>(&split))
            if (answer->explanation) entry.explanation = std::move(answer->explanation);
    }
    return entry;
}

inline RunCell run_cell(const Corpus& corpus, const ExperimentConfig& cfg, Backend& backend,
                        PromptId prompt, Concept target, double temperature, int iteration) {
    const PromptTemplate& tpl = cfg.catalog.get(prompt);
    RequestParams params = cfg.params;
    params.temperature = temperature;

    std::vector<AnnotationRequest> requests;
    requests.reserve(corpus.records.size());
    for (const auto& rec : corpus.records)
        requests.push_back(
            {cfg.catalog.render(prompt, target, rec.comment, cfg.definitions), params, iteration});

    std::vector<AnnotateResult> results = run_batch(requests, backend, cfg.concurrency, cfg.retry);

    RunCell cell;
    cell.prompt = prompt;
    cell.target = target;
    cell.temperature = temperature;
    cell.iteration = iteration;
    cell.items.reserve(results.size());
    for (size_t i = 0; i < results.size(); ++i) {
        LedgerEntry entry = parse_item(tpl, results[i], corpus.records[i], target);
        switch (entry.category) {
            case ItemCategory::Parsed: ++cell.counts.parsed; break;
            case ItemCategory::Uncertain: ++cell.counts.uncertain; break;
            case ItemCategory::WrongClass: ++cell.counts.wrong_class; break;
            case ItemCategory::Failed: ++cell.counts.failed; break;
        }
        cell.items.push_back(std::move(entry));
    }
    return cell;
}

// Report on the certain items of a binary cell.
inline std::optional<ClassificationReport> binary_report(const RunCell& cell) {
    std::vector<bool> pred, truth;
    for (const auto& e : cell.items) {
        if (e.category != ItemCategory::Parsed || !e.label) continue;
        pred.push_back(*e.label);
        truth.push_back(e.truth);
    }
    if (pred.empty()) return std::nullopt;
    return classification_report(pred, truth);
}

// Report on a probability cell under one decision threshold.
inline std::optional<ClassificationReport> thresholded_report(const RunCell& cell, double threshold) {
    std::vector<bool> pred, truth;
    for (const auto& e : cell.items) {
        if (e.category != ItemCategory::Parsed || !e.probability) continue;
        pred.push_back(apply_threshold(*e.probability, threshold));
        truth.push_back(e.truth);
    }
    if (pred.empty()) return std::nullopt;
    return classification_report(pred, truth);
}

inline std::vector<double> cell_probabilities(const RunCell& cell) {
    std::vector<double> probs;
    for (const auto& e : cell.items)
        if (e.category == ItemCategory::Parsed && e.probability) probs.push_back(*e.probability);
    return probs;
}

inline const RunCell* find_cell(const std::vector<RunCell>& cells, PromptId prompt, Concept target,
                                double temperature, int iteration) {
    for (const auto& c : cells)
        if (c.prompt == prompt && c.target == target && c.temperature == temperature &&
            c.iteration == iteration)
            return &c;
    return nullptr;
}

inline ReliabilityMatrix build_reliability_matrix(const std::vector<const RunCell*>& iterations,
                                                  size_t units, Scale scale,
                                                  std::optional<double> nominal_threshold) {
    ReliabilityMatrix m(iterations.size(), units, scale);
    for (size_t o = 0; o < iterations.size(); ++o) {
        const RunCell& cell = *iterations[o];
        for (size_t u = 0; u < cell.items.size(); ++u) {
            const LedgerEntry& e = cell.items[u];
            if (e.category != ItemCategory::Parsed) continue;
            if (e.label) {
                m.set(o, u, *e.label ? 1.0 : 0.0);
            } else if (e.probability) {
                if (nominal_threshold)
                    m.set(o, u, apply_threshold(*e.probability, *nominal_threshold) ? 1.0 : 0.0);
                else
                    m.set(o, u, *e.probability);
            }
        }
    }
    return m;
}

}  // namespace detail

inline ReportBundle run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    Corpus corpus = load_corpus(cfg.corpus_path);

    std::unique_ptr<CassetteStore> cassette;
    std::unique_ptr<Backend> backend;
    switch (cfg.backend) {
        case BackendMode::Replay:
            cassette = std::make_unique<CassetteStore>(cfg.cassette_path, CassetteStore::Mode::ReadOnly);
            backend = std::make_unique<ReplayBackend>(*cassette);
            break;
        case BackendMode::Record:
            cassette = std::make_unique<CassetteStore>(cfg.cassette_path, CassetteStore::Mode::Append);
            backend = std::make_unique<LiveBackend>(cfg.live, cassette.get());
            break;
        case BackendMode::Live:
            backend = std::make_unique<LiveBackend>(cfg.live);
            break;
    }

    ReportBundle bundle;
    bundle.experiment = cfg.experiment;
    bundle.corpus_fingerprint = corpus_fingerprint(corpus);
    bundle.params_fingerprint = cfg.params.fingerprint();
    bundle.corpus_size = corpus.size();
    bundle.prompts = cfg.effective_prompts();
    bundle.concepts = cfg.concepts;
    bundle.iterations = cfg.experiment == Experiment::E3 ? cfg.iterations : 1;
    bundle.temperatures = cfg.experiment == Experiment::E3 ? cfg.temperatures
                                                           : std::vector<double>{cfg.params.temperature};
    bundle.thresholds = cfg.thresholds;
    bundle.probability_alpha_scale = cfg.probability_alpha_scale;
    bundle.seed = cfg.seed;
    bundle.backend = std::string(backend_mode_name(cfg.backend));

    // Execute the run grid in deterministic order.
    for (PromptId prompt : bundle.prompts) {
        for (double temperature : bundle.temperatures) {
            const int iters = bundle.iterations;
            for (int iteration = 0; iteration < iters; ++iteration) {
                for (Concept c : cfg.concepts) {
                    bundle.cells.push_back(detail::run_cell(corpus, cfg, *backend, prompt, c,
                                                            temperature, iteration));
                }
            }
        }
    }

    const double base_temp = bundle.temperatures.front();
    auto base_cell = [&](PromptId p, Concept c) {
        return detail::find_cell(bundle.cells, p, c, base_temp, 0);
    };

    // Per-prompt reports on the base iteration.
    for (PromptId prompt : bundle.prompts) {
        const PromptTemplate& tpl = cfg.catalog.get(prompt);
        for (Concept c : cfg.concepts) {
            const RunCell* cell = base_cell(prompt, c);
            if (!cell) continue;
            std::optional<ClassificationReport> report;
            if (tpl.output_kind == OutputKind::Probability)
                report = detail::thresholded_report(*cell, cfg.thresholds.get(c));
            else
                report = detail::binary_report(*cell);
            if (report) bundle.reports.push_back({prompt, c, std::move(*report)});
        }
    }

    // Experiment-specific derivations.
    if (cfg.experiment == Experiment::E1) {
        for (Concept c : cfg.concepts) {
            const RunCell* cell = base_cell(PromptId::P1, c);
            if (!cell) continue;
            OutcomeSummary s;
            s.target = c;
            for (const auto& e : cell->items) {
                if (e.category == ItemCategory::Parsed && e.label)
                    (*e.label ? s.model_yes : s.model_no)++;
                else if (e.category == ItemCategory::Uncertain)
                    ++s.model_uncertain;
            }
            for (const auto& rec : corpus.records)
                (rec.majority_for(c) ? s.human_yes : s.human_no)++;
            bundle.outcome_summaries.push_back(s);
        }
    }

    const bool wants_sweeps = cfg.experiment == Experiment::E2 || cfg.experiment == Experiment::Compare;
    if (wants_sweeps) {
        for (PromptId prompt : bundle.prompts) {
            if (cfg.catalog.get(prompt).output_kind != OutputKind::Probability) continue;
            for (Concept c : cfg.concepts) {
                const RunCell* cell = base_cell(prompt, c);
                if (!cell) continue;
                std::vector<double> probs;
                std::vector<bool> truth;
                for (const auto& e : cell->items) {
                    if (e.category != ItemCategory::Parsed || !e.probability) continue;
                    probs.push_back(*e.probability);
                    truth.push_back(e.truth);
                }
                if (probs.empty()) continue;
                bundle.sweeps.push_back({prompt, c, threshold_sweep(probs, truth, cfg.sweep_thresholds)});
            }
        }
    }

    // Score-level agreement against the 5-rater score (probability prompts).
    if (cfg.experiment == Experiment::E2) {
        for (PromptId prompt : bundle.prompts) {
            if (cfg.catalog.get(prompt).output_kind != OutputKind::Probability) continue;
            for (Concept c : cfg.concepts) {
                const RunCell* cell = base_cell(prompt, c);
                if (!cell) continue;
                std::vector<ScoreBin> pred, truth;
                for (size_t i = 0; i < cell->items.size(); ++i) {
                    const LedgerEntry& e = cell->items[i];
                    if (e.category != ItemCategory::Parsed || !e.probability) continue;
                    const auto& votes = corpus.records[i].votes_for(c);
                    if (votes.size() != 5) continue;  // score rule is defined for 5 raters
                    pred.push_back(bin_probability(*e.probability));
                    truth.push_back(mturk_score(votes));
                }
                if (!pred.empty())
                    bundle.score_agreements.push_back({prompt, c, score_agreement_report(pred, truth)});
            }
        }
    }

    // Probability histograms for any probability prompt in the run.
    for (PromptId prompt : bundle.prompts) {
        if (cfg.catalog.get(prompt).output_kind != OutputKind::Probability) continue;
        for (Concept c : cfg.concepts) {
            const RunCell* cell = base_cell(prompt, c);
            if (!cell) continue;
            bundle.histograms.push_back(
                {prompt, c, histogram(detail::cell_probabilities(*cell), cfg.histogram_bin_width)});
        }
    }

    if (cfg.experiment == Experiment::E3) {
        for (PromptId prompt : bundle.prompts) {
            const PromptTemplate& tpl = cfg.catalog.get(prompt);
            for (double temperature : cfg.temperatures) {
                AlphaRow row;
                row.prompt = prompt;
                row.temperature = temperature;
                for (Concept c : cfg.concepts) {
                    std::vector<const RunCell*> iterations;
                    for (int i = 0; i < cfg.iterations; ++i) {
                        const RunCell* cell =
                            detail::find_cell(bundle.cells, prompt, c, temperature, i);
                        if (cell) iterations.push_back(cell);
                    }
                    if (iterations.size() < 2) continue;
                    std::optional<double> nominal_threshold;
                    Scale scale = Scale::Nominal;
                    if (tpl.output_kind == OutputKind::Probability) {
                        scale = cfg.probability_alpha_scale;
                        if (scale == Scale::Nominal) nominal_threshold = cfg.thresholds.get(c);
                    }
                    ReliabilityMatrix m = detail::build_reliability_matrix(
                        iterations, corpus.size(), scale, nominal_threshold);
                    try {
                        AlphaResult a = krippendorff_alpha(m);
                        row.alpha[concept_index(c)] = a.value;
                        row.degenerate[concept_index(c)] = a.degenerate;
                    } catch (const MetricsError&) {
                        // no pairable values: alpha stays undefined for this concept
                    }
                }
                bundle.alpha_rows.push_back(std::move(row));
            }
        }
    }

    if (cfg.experiment == Experiment::E4) {
        // Venn partition over the binary-with-explanation labels; an item
        // enters only with all three concept labels parsed.
        std::vector<std::pair<std::string, ItemLabels>> labeled;
        for (size_t i = 0; i < corpus.records.size(); ++i) {
            ItemLabels labels;
            for (Concept c : cfg.concepts) {
                const RunCell* cell = base_cell(PromptId::P4, c);
                if (!cell) continue;
                const LedgerEntry& e = cell->items[i];
                if (e.category == ItemCategory::Parsed && e.label)
                    labels[concept_index(c)] = *e.label;
            }
            labeled.emplace_back(corpus.records[i].comment.id, labels);
        }
        if (cfg.concepts.size() == kAllConcepts.size()) {
            std::vector<ItemLabels> complete;
            for (const auto& [id, labels] : labeled) {
                if (labels[0] && labels[1] && labels[2]) complete.push_back(labels);
            }
            bundle.venn_excluded = labeled.size() - complete.size();
            bundle.venn = venn_partition(complete);

            // Manual-reading samples for the outcome cells discussed in the
            // reasoning analysis.
            const std::array<std::array<bool, 3>, 3> cells_of_interest{
                {{false, true, true}, {false, false, true}, {false, true, false}}};
            for (const auto& cell : cells_of_interest)
                bundle.samples.push_back({cell, sample_cell(cell, labeled, cfg.sample_k, cfg.seed)});
        }

        // Certainty bins over the probability-with-explanation scores.
        for (Concept c : cfg.concepts) {
            const RunCell* cell = base_cell(PromptId::P5, c);
            if (!cell) continue;
            CertaintyCounts counts;
            counts.target = c;
            for (double p : detail::cell_probabilities(*cell)) {
                switch (certainty_bin(p)) {
                    case CertaintyBin::Unlikely: ++counts.unlikely; break;
                    case CertaintyBin::Uncertain: ++counts.uncertain; break;
                    case CertaintyBin::Likely: ++counts.likely; break;
                }
            }
            bundle.certainty.push_back(counts);
        }

        // N-gram tables: per (prompt, concept); per P4 outcome; per P5
        // certainty bin.
        auto add_group = [&](std::string name, const std::vector<std::string>& texts) {
            if (texts.empty()) return;
            NgramGroup group;
            group.group = std::move(name);
            for (int n = 3; n <= 5; ++n)
                group.tables.push_back(ngram_counts(texts, n, cfg.ngram_top_k));
            bundle.ngram_groups.push_back(std::move(group));
        };

        for (PromptId prompt : bundle.prompts) {
            for (Concept c : cfg.concepts) {
                const RunCell* cell = base_cell(prompt, c);
                if (!cell) continue;
                std::vector<std::string> texts;
                for (const auto& e : cell->items)
                    if (e.explanation) texts.push_back(*e.explanation);
                add_group(std::string(prompt_name(prompt)) + "/" + std::string(concept_name(c)),
                          texts);
            }
        }
        {
            std::vector<std::string> yes_texts, no_texts;
            for (Concept c : cfg.concepts) {
                const RunCell* cell = base_cell(PromptId::P4, c);
                if (!cell) continue;
                for (const auto& e : cell->items) {
                    if (e.category != ItemCategory::Parsed || !e.explanation || !e.label) continue;
                    (*e.label ? yes_texts : no_texts).push_back(*e.explanation);
                }
            }
            add_group("P4/yes", yes_texts);
            add_group("P4/no", no_texts);
        }
        {
            std::array<std::vector<std::string>, 3> by_bin;
            for (Concept c : cfg.concepts) {
                const RunCell* cell = base_cell(PromptId::P5, c);
                if (!cell) continue;
                for (const auto& e : cell->items) {
                    if (e.category != ItemCategory::Parsed || !e.explanation || !e.probability)
                        continue;
                    by_bin[static_cast<size_t>(certainty_bin(*e.probability))].push_back(
                        *e.explanation);
                }
            }
            add_group("P5/unlikely", by_bin[0]);
            add_group("P5/uncertain", by_bin[1]);
            add_group("P5/likely", by_bin[2]);
        }
    }

    if (cfg.experiment == Experiment::Compare) {
        for (const auto& r : bundle.reports) {
            for (const auto& row : r.report.rows) {
                bundle.compare.push_back({r.prompt, r.target, row.class_label, row.support,
                                          row.precision, row.recall, row.f1, r.report.accuracy});
            }
        }
    }

    return bundle;
}

// ---------------------------------------------------------------------------
// Cross-prompt comparison
// ---------------------------------------------------------------------------

// Flattens per-(prompt, concept) reports from several bundles into one grid.
// All bundles must share the corpus fingerprint and jointly cover at least
// two prompts. Order of the input bundles does not affect the output.
inline std::vector<CompareRow> compare_prompts(const std::vector<ReportBundle>& bundles) {
    if (bundles.empty()) throw CorpusMismatch("compare_prompts: no bundles");
    const std::string& fp = bundles.front().corpus_fingerprint;
    std::set<PromptId> prompt_set;
    for (const auto& b : bundles) {
        if (b.corpus_fingerprint != fp)
            throw CorpusMismatch("compare_prompts: bundles computed over different corpora");
        for (const auto& r : b.reports) prompt_set.insert(r.prompt);
    }
    if (prompt_set.size() < 2)
        throw CorpusMismatch("compare_prompts: need reports for at least two prompts");

    // Deduplicate on (prompt, concept, class); identical bundles collapse.
    std::map<std::tuple<PromptId, Concept, std::string>, CompareRow> grid;
    for (const auto& b : bundles) {
        for (const auto& r : b.reports) {
            for (const auto& row : r.report.rows) {
                grid[{r.prompt, r.target, row.class_label}] =
                    CompareRow{r.prompt,        r.target, row.class_label, row.support,
                               row.precision,   row.recall, row.f1,        r.report.accuracy};
            }
        }
    }
    std::vector<CompareRow> rows;
    rows.reserve(grid.size());
    for (auto& [key, row] : grid) rows.push_back(std::move(row));
    return rows;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string bundle_csv(const ReportBundle& bundle) {
    std::ostringstream out;
    out << kReportCsvHeader << '\n';
    for (const auto& r : bundle.reports) {
        std::string category = std::string(prompt_name(r.prompt)) + "/" +
                               std::string(concept_display_name(r.target));
        append_report_csv(out, category, r.report);
    }
    for (const auto& s : bundle.sweeps) {
        for (const auto& p : s.points) {
            std::string category = std::string(prompt_name(s.prompt)) + "/" +
                                   std::string(concept_display_name(s.target)) + "@" +
                                   format_fixed(p.threshold, 2);
            append_report_csv(out, category, p.report);
        }
    }
    for (const auto& s : bundle.score_agreements) {
        std::string category = std::string(prompt_name(s.prompt)) + "/" +
                               std::string(concept_display_name(s.target)) + "/scores";
        append_report_csv(out, category, s.report);
    }
    return out.str();
}

inline std::string bundle_markdown(const ReportBundle& bundle) {
    std::ostringstream out;
    out << "# Annotation report: " << experiment_name(bundle.experiment) << "\n\n";
    out << "- corpus fingerprint: `" << bundle.corpus_fingerprint << "`\n";
    out << "- corpus size: " << bundle.corpus_size << "\n";
    out << "- backend: " << bundle.backend << "\n\n";

    if (!bundle.reports.empty()) {
        out << "## Classification reports\n\n";
        out << "| Category | Class | Support | Precision | Recall | F1-score | Accuracy |\n";
        out << "|---|---|---|---|---|---|---|\n";
        for (const auto& r : bundle.reports) {
            bool first = true;
            for (const auto& row : r.report.rows) {
                out << "| " << prompt_name(r.prompt) << "/" << concept_display_name(r.target)
                    << " | " << row.class_label << " | " << row.support << " | "
                    << display_metric(row.precision) << " | " << display_metric(row.recall)
                    << " | " << display_metric(row.f1) << " | "
                    << (first ? display_metric(r.report.accuracy) : std::string()) << " |\n";
                first = false;
            }
        }
        out << '\n';
    }

    if (!bundle.alpha_rows.empty()) {
        out << "## Consistency (Krippendorff's alpha)\n\n";
        out << "| Prompt | Temperature | Hateful | Offensive | Toxic |\n|---|---|---|---|---|\n";
        for (const auto& row : bundle.alpha_rows) {
            out << "| " << prompt_name(row.prompt) << " | " << format_fixed(row.temperature, 1);
            for (Concept c : kAllConcepts) out << " | " << display_metric(row.alpha[concept_index(c)]);
            out << " |\n";
        }
        out << '\n';
    }

    if (bundle.venn) {
        out << "## Label partition\n\n";
        out << "| Hateful | Offensive | Toxic | Count |\n|---|---|---|---|\n";
        for (size_t idx = 0; idx < 8; ++idx) {
            out << "| " << ((idx & 4u) ? "yes" : "no") << " | " << ((idx & 2u) ? "yes" : "no")
                << " | " << ((idx & 1u) ? "yes" : "no") << " | " << bundle.venn->counts[idx]
                << " |\n";
        }
        out << "\nTotal " << bundle.venn->total() << ", excluded " << bundle.venn_excluded
            << ".\n\n";
    }

    out << "## Error ledger\n\n";
    out << "| Prompt | Concept | Temperature | Iteration | Parsed | Uncertain | Wrong class | Failed |\n";
    out << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& cell : bundle.cells) {
        out << "| " << prompt_name(cell.prompt) << " | " << concept_display_name(cell.target)
            << " | " << format_fixed(cell.temperature, 1) << " | " << cell.iteration << " | "
            << cell.counts.parsed << " | " << cell.counts.uncertain << " | "
            << cell.counts.wrong_class << " | " << cell.counts.failed << " |\n";
    }
    out << '\n';
    bool any_listed = false;
    for (const auto& cell : bundle.cells) {
        for (const auto& e : cell.items) {
            if (e.category == ItemCategory::Parsed) continue;
            if (!any_listed) {
                out << "Items excluded from metrics:\n\n";
                any_listed = true;
            }
            out << "- `" << e.comment_id << "` (" << prompt_name(cell.prompt) << "/"
                << concept_name(cell.target) << ", iteration " << cell.iteration << "): "
                << item_category_name(e.category);
            if (!e.detail.empty()) out << " (" << e.detail << ")";
            out << '\n';
        }
    }
    return out.str();
}

}  // namespace detail

namespace detail {

inline std::string partition_csv(const VennPartition& venn) {
    std::ostringstream out;
    out << "Hateful,Offensive,Toxic,Count\n";
    for (size_t idx = 0; idx < 8; ++idx)
        out << ((idx & 4u) ? "yes" : "no") << ',' << ((idx & 2u) ? "yes" : "no") << ','
            << ((idx & 1u) ? "yes" : "no") << ',' << venn.counts[idx] << '\n';
    return out.str();
}

inline std::string ngrams_csv(const std::vector<NgramGroup>& groups) {
    std::ostringstream out;
    out << "Group,N,Ngram,Count\n";
    for (const auto& g : groups) {
        for (const auto& t : g.tables) {
            for (const auto& e : t.entries) {
                std::string tuple;
                for (size_t i = 0; i < e.tokens.size(); ++i) {
                    if (i) tuple += ' ';
                    tuple += e.tokens[i];
                }
                // Tuples may hold comma or quote tokens; always quote the field.
                replace_all(tuple, "\"", "\"\"");
                out << g.group << ',' << t.n << ",\"" << tuple << "\"," << e.count << '\n';
            }
        }
    }
    return out.str();
}

inline std::string histograms_csv(const std::vector<ConceptHistogram>& histograms) {
    std::ostringstream out;
    out << "Prompt,Concept,BinStart,Count\n";
    for (const auto& h : histograms)
        for (const auto& b : h.bins)
            out << prompt_name(h.prompt) << ',' << concept_display_name(h.target) << ','
                << format_fixed(b.start, 2) << ',' << b.count << '\n';
    return out.str();
}

}  // namespace detail

// Writes the bundle under stable file names; returns the paths written.
// JSON is canonical, so emitting the same bundle twice yields identical bytes.
inline std::vector<std::filesystem::path> emit_report(const ReportBundle& bundle,
                                                      const std::vector<std::string>& formats,
                                                      const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    auto emit = [&](const char* name, const std::string& content) {
        auto path = out_dir / name;
        detail::write_file(path, content);
        written.push_back(path);
    };
    for (const auto& format : formats) {
        if (format == "json") {
            emit("bundle.json", bundle.to_canonical_json().dump(2) + "\n");
        } else if (format == "csv") {
            emit("reports.csv", detail::bundle_csv(bundle));
            if (bundle.venn) emit("partition.csv", detail::partition_csv(*bundle.venn));
            if (!bundle.ngram_groups.empty()) emit("ngrams.csv", detail::ngrams_csv(bundle.ngram_groups));
            if (!bundle.histograms.empty())
                emit("histograms.csv", detail::histograms_csv(bundle.histograms));
        } else if (format == "markdown") {
            emit("bundle.md", detail::bundle_markdown(bundle));
        } else {
            throw ConfigError("unknown output format \"" + format + "\"");
        }
    }
    return written;
}

}  // namespace hot
