#include "m3gm/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <utility>
#include <vector>

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Registers `--name VALUE` that sets config key `key`.
void config_option(CLI::App* app, Overrides& overrides, const std::string& name, std::string key,
                   const std::string& help) {
    app->add_option_function<std::string>(
        name, [&overrides, key = std::move(key)](const std::string& v) { overrides.emplace_back(key, v); }, help);
}

void config_flag(CLI::App* app, Overrides& overrides, const std::string& name, std::string key,
                 const std::string& help) {
    app->add_flag_callback(
        name, [&overrides, key = std::move(key)] { overrides.emplace_back(key, "true"); }, help);
}

m3gm::RunConfig resolve_config(const std::string& config_file, const Overrides& overrides) {
    m3gm::RunConfig cfg;
    if (!config_file.empty()) {
        cfg.load(config_file);
    } else {
        std::string work_dir = cfg.work_dir;
        if (const char* env = std::getenv("M3GM_WORK_DIR")) work_dir = env;
        for (const auto& [key, value] : overrides) {
            if (key == "work_dir") work_dir = value;
        }
        const auto saved = work_dir + "/config.txt";
        if (std::filesystem::exists(saved)) cfg.load(saved);
    }
    cfg.apply_env();
    for (const auto& [key, value] : overrides) cfg.set(key, value);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Max-margin motif graph model for WordNet-style link prediction"};
    app.require_subcommand(1);
    app.fallthrough();

    Overrides overrides;
    std::string config_file;
    bool quiet = false;
    app.add_option("--config", config_file, "Config file of key = value lines (default: <work-dir>/config.txt)");
    config_option(&app, overrides, "--work-dir", "work_dir", "Run directory holding every artifact");
    config_option(&app, overrides, "--threads", "threads", "Worker threads for ranking");
    config_option(&app, overrides, "--seed", "seed", "Root random seed");
    app.add_option_function<std::vector<std::string>>(
        "--set",
        [&](const std::vector<std::string>& pairs) {
            for (const auto& kv : pairs) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected KEY=VALUE");
                overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
            }
        },
        "Set any config key, KEY=VALUE (repeatable)");
    app.add_flag("-q,--quiet", quiet, "Suppress progress logging");

    auto* ingest = app.add_subcommand("ingest", "Read train/dev/test triple files into the run directory");
    config_option(ingest, overrides, "--train", "train", "Training triples");
    config_option(ingest, overrides, "--dev", "dev", "Development triples");
    config_option(ingest, overrides, "--test", "test", "Test triples");
    config_option(ingest, overrides, "--symmetric", "symmetric", "Comma-separated symmetric relations");

    auto* train_assoc = app.add_subcommand("train-assoc", "Train the association model");
    config_option(train_assoc, overrides, "--model", "model", "transe, bilin or distmult");
    config_option(train_assoc, overrides, "--dim", "dim", "Embedding dimension");
    config_option(train_assoc, overrides, "--neg", "assoc_negatives", "Negatives per positive");
    config_option(train_assoc, overrides, "--lr", "assoc_lr", "AdaGrad learning rate");
    config_option(train_assoc, overrides, "--max-epochs", "max_epochs", "Epoch cap");
    config_option(train_assoc, overrides, "--patience", "patience", "Early-stopping patience");
    config_option(train_assoc, overrides, "--vectors", "vectors", "Word vector file to average");
    config_option(train_assoc, overrides, "--lemma-file", "lemmas", "Synset lemma inventory");
    config_option(train_assoc, overrides, "--synset-vectors", "synset_vectors", "Precomputed synset vectors");

    auto* train_graph = app.add_subcommand("train-m3gm", "Train motif weights on top of the association model");
    config_option(train_graph, overrides, "--margin", "margin", "Hinge margin");
    config_option(train_graph, overrides, "--lambda", "lambda", "L2 coefficient");
    config_option(train_graph, overrides, "--neg", "m3gm_negatives", "Negative samples per edge");
    config_option(train_graph, overrides, "--epochs", "m3gm_epochs", "Training epochs");
    config_option(train_graph, overrides, "--lr", "m3gm_lr", "AdaGrad learning rate");
    config_flag(train_graph, overrides, "--fine-tune", "fine_tune", "Also update association parameters");
    config_flag(train_graph, overrides, "--train-only", "train_only", "Fit on train instead of train + dev");

    auto* tune = app.add_subcommand("tune-alpha", "Grid-search per-relation interpolation weights on dev");
    config_option(tune, overrides, "--k", "k", "Re-ranking depth");

    std::string alpha_file, rerank_output;
    auto* rerank = app.add_subcommand("rerank", "Write reranked top-K lists for the test split");
    config_option(rerank, overrides, "--k", "k", "Re-ranking depth");
    rerank->add_option("--alpha-file", alpha_file, "Alpha table (default: the tuned one)");
    rerank->add_option("-o,--output", rerank_output, "Output file (default: stdout)");

    std::string system_name = "m3gm";
    bool per_relation = false;
    auto* eval = app.add_subcommand("eval", "Evaluate a system on the test split");
    eval->add_option("--system", system_name, "rule, assoc or m3gm")->check(CLI::IsMember({"rule", "assoc", "m3gm"}));
    eval->add_flag("--per-relation", per_relation, "Break metrics down by relation");
    config_option(eval, overrides, "--fallback", "fallback", "Rule fallback: shuffle or expected-rank");
    config_option(eval, overrides, "--k", "k", "Re-ranking depth");

    bool all_features = false;
    auto* motifs = app.add_subcommand("count-motifs", "Print the motif census of the training graph");
    motifs->add_flag("--all", all_features, "Include zero-valued features");

    std::size_t top = 20;
    auto* inspect = app.add_subcommand("inspect-weights", "Print the largest motif weights");
    inspect->add_option("--top", top, "Number of features");

    auto* run = app.add_subcommand("run", "Run every stage, then evaluate all three systems");
    config_option(run, overrides, "--train", "train", "Training triples");
    config_option(run, overrides, "--dev", "dev", "Development triples");
    config_option(run, overrides, "--test", "test", "Test triples");
    config_option(run, overrides, "--model", "model", "Association variant");
    config_option(run, overrides, "--dim", "dim", "Embedding dimension");
    config_option(run, overrides, "--vectors", "vectors", "Word vector file to average");
    run->add_flag("--per-relation", per_relation, "Break metrics down by relation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::ofstream null_stream;
    std::ostream& log = quiet ? static_cast<std::ostream&>(null_stream) : std::cerr;
    try {
        m3gm::Pipeline pipeline(resolve_config(config_file, overrides), log);
        if (*ingest) {
            pipeline.ingest();
        } else if (*train_assoc) {
            pipeline.train_association();
        } else if (*train_graph) {
            pipeline.train_graph();
        } else if (*tune) {
            pipeline.tune_alpha();
        } else if (*rerank) {
            if (rerank_output.empty()) {
                pipeline.rerank(std::cout, alpha_file);
            } else {
                std::ofstream out(rerank_output);
                if (!out) throw m3gm::FormatError("cannot open '" + rerank_output + "' for writing");
                pipeline.rerank(out, alpha_file);
            }
        } else if (*eval) {
            const auto report = pipeline.evaluate(m3gm::parse_system(system_name), per_relation);
            m3gm::write_report(std::cout, report, per_relation);
        } else if (*motifs) {
            pipeline.count_motifs(std::cout, all_features);
        } else if (*inspect) {
            pipeline.inspect_weights(std::cout, top);
        } else if (*run) {
            const auto result = pipeline.run(per_relation);
            for (auto [name, report] : {std::pair{"rule", &result.rule}, std::pair{"assoc", &result.association},
                                        std::pair{"m3gm", &result.graph}}) {
                std::cout << "== " << name << '\n';
                m3gm::write_report(std::cout, *report, per_relation);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return m3gm::exit_code_for(e);
    }
    return 0;
}
