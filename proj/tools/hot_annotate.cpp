// Command-line front end: runs the annotation experiments over a corpus with
// a live, recording, or replay backend and writes report bundles.

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hot/runner.hpp"

namespace {

int run_command(const std::string& experiment_arg, const std::string& backend_arg,
                const std::vector<std::string>& prompt_args,
                const std::vector<std::string>& concept_args,
                const std::vector<double>& temperatures, int iterations,
                const std::vector<double>& thresholds, int concurrency, uint64_t seed,
                const std::string& corpus_arg, const std::string& cassette_arg,
                const std::string& out_arg, const std::vector<std::string>& formats,
                const std::string& model, const std::string& base_url,
                const std::string& layout_arg, const std::string& templates_file,
                const std::string& definitions_file, const std::string& alpha_scale_arg) {
    hot::ExperimentConfig cfg;

    auto experiment = hot::experiment_from_string(experiment_arg);
    if (!experiment) throw hot::ConfigError("unknown experiment \"" + experiment_arg + "\"");
    cfg.experiment = *experiment;

    if (backend_arg == "live") cfg.backend = hot::BackendMode::Live;
    else if (backend_arg == "record") cfg.backend = hot::BackendMode::Record;
    else if (backend_arg == "replay") cfg.backend = hot::BackendMode::Replay;
    else throw hot::ConfigError("unknown backend \"" + backend_arg + "\"");

    for (const auto& p : prompt_args) {
        auto id = hot::prompt_from_string(p);
        if (!id) throw hot::ConfigError("unknown prompt \"" + p + "\"");
        cfg.prompts.push_back(*id);
    }
    if (!concept_args.empty()) {
        cfg.concepts.clear();
        for (const auto& c : concept_args) {
            auto parsed = hot::concept_from_string(c);
            if (!parsed) throw hot::ConfigError("unknown concept \"" + c + "\"");
            cfg.concepts.push_back(*parsed);
        }
    }
    if (!temperatures.empty()) {
        cfg.params.temperature = temperatures.front();
        cfg.temperatures = temperatures;  // for experiment 3 this is the grid
    }
    cfg.iterations = iterations;
    if (!thresholds.empty()) {
        if (thresholds.size() != 3)
            throw hot::ConfigError("--thresholds expects three values (hateful,offensive,toxic)");
        for (size_t i = 0; i < 3; ++i)
            cfg.thresholds.by_concept[i] = thresholds[i];
    }
    cfg.concurrency = concurrency;
    cfg.seed = seed;
    cfg.corpus_path = corpus_arg;
    cfg.cassette_path = cassette_arg;
    cfg.out_dir = out_arg;
    if (!formats.empty()) cfg.formats = formats;
    cfg.params.model = model;
    if (!base_url.empty()) cfg.live.base_url = base_url;
    if (layout_arg == "inline") cfg.live.layout = hot::MessageLayout::Inline;
    else if (layout_arg == "separate") cfg.live.layout = hot::MessageLayout::SeparateTurns;
    else if (!layout_arg.empty()) throw hot::ConfigError("unknown message layout");
    if (alpha_scale_arg == "nominal") cfg.probability_alpha_scale = hot::Scale::Nominal;
    else if (alpha_scale_arg == "interval") cfg.probability_alpha_scale = hot::Scale::Interval;
    else if (!alpha_scale_arg.empty()) throw hot::ConfigError("unknown alpha scale");

    if (!templates_file.empty()) cfg.catalog.apply_template_overrides_file(templates_file);
    if (!definitions_file.empty()) {
        std::ifstream in(definitions_file);
        if (!in) throw hot::ConfigError("cannot open definitions file: " + definitions_file);
        nlohmann::json j;
        in >> j;
        cfg.definitions = hot::DefinitionSource::from_json(j);
    }

    hot::ReportBundle bundle = hot::run_experiment(cfg);
    auto written = hot::emit_report(bundle, cfg.formats, cfg.out_dir);

    std::cout << "experiment " << hot::experiment_name(bundle.experiment) << " over "
              << bundle.corpus_size << " comments (corpus " << bundle.corpus_fingerprint
              << ")\n";
    for (const auto& cell : bundle.cells) {
        std::cout << "  " << hot::prompt_name(cell.prompt) << "/"
                  << hot::concept_name(cell.target) << " t=" << cell.temperature << " it#"
                  << cell.iteration << ": parsed " << cell.counts.parsed << ", uncertain "
                  << cell.counts.uncertain << ", wrong-class " << cell.counts.wrong_class
                  << ", failed " << cell.counts.failed << '\n';
    }
    for (const auto& path : written) std::cout << "wrote " << path.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HOT comment annotation and evaluation toolkit"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run an annotation experiment");
    std::string experiment_arg;
    run->add_option("--experiment", experiment_arg, "1|2|3|4|compare")->required();
    std::string corpus_arg;
    run->add_option("--corpus", corpus_arg, "corpus JSONL path")->required();
    std::string backend_arg = "replay";
    run->add_option("--backend", backend_arg, "live|record|replay");
    std::string cassette_arg;
    run->add_option("--cassette", cassette_arg, "cassette JSONL path (record/replay)");
    std::vector<std::string> prompt_args;
    run->add_option("--prompts", prompt_args, "prompt ids, e.g. P2,P3")->delimiter(',');
    std::vector<std::string> concept_args;
    run->add_option("--concepts", concept_args, "subset of hateful,offensive,toxic")->delimiter(',');
    std::vector<double> temperatures;
    run->add_option("--temperature", temperatures,
                    "sampling temperature; a comma list sets the consistency grid")
        ->delimiter(',');
    int iterations = 3;
    run->add_option("--iterations", iterations, "repeat count for experiment 3");
    std::vector<double> thresholds;
    run->add_option("--thresholds", thresholds, "per-concept decision thresholds, e.g. 0.7,0.7,0.9")
        ->delimiter(',');
    int concurrency = 4;
    run->add_option("--concurrency", concurrency, "max in-flight requests");
    uint64_t seed = 42;
    run->add_option("--seed", seed, "sampling seed");
    std::string out_arg = "hot_out";
    run->add_option("--out", out_arg, "output directory");
    std::vector<std::string> formats;
    run->add_option("--format", formats, "json,csv,markdown")->delimiter(',');
    std::string model = "gpt-3.5-turbo";
    run->add_option("--model", model, "chat model name");
    std::string base_url;
    run->add_option("--base-url", base_url, "chat-completions base URL (live/record)");
    std::string layout_arg;
    run->add_option("--layout", layout_arg, "message layout: separate|inline");
    std::string templates_file;
    run->add_option("--templates", templates_file, "prompt template override JSON");
    std::string definitions_file;
    run->add_option("--definitions", definitions_file, "concept definition override JSON");
    std::string alpha_scale_arg;
    run->add_option("--alpha-scale", alpha_scale_arg,
                    "alpha scale for probability outputs: interval|nominal");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        return run_command(experiment_arg, backend_arg, prompt_args, concept_args, temperatures,
                           iterations, thresholds, concurrency, seed, corpus_arg, cassette_arg,
                           out_arg, formats, model, base_url, layout_arg, templates_file,
                           definitions_file, alpha_scale_arg);
    } catch (const hot::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const hot::PromptError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const hot::MetricsError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const hot::CorpusError& e) {
        std::cerr << "corpus error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "backend error: " << e.what() << '\n';
        return 3;
    }
}
