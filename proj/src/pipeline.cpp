#include "m3gm/pipeline.hpp"

#include "m3gm/embeddings.hpp"
#include "m3gm/filter.hpp"
#include "m3gm/io_util.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <istream>
#include <ostream>
#include <sstream>

namespace m3gm {

const char* to_string(SystemKind s) {
    switch (s) {
        case SystemKind::Rule: return "rule";
        case SystemKind::Association: return "assoc";
        case SystemKind::Graph: return "m3gm";
    }
    return "?";
}

SystemKind parse_system(std::string_view name) {
    if (name == "rule") return SystemKind::Rule;
    if (name == "assoc") return SystemKind::Association;
    if (name == "m3gm") return SystemKind::Graph;
    throw ConfigError("unknown system '" + std::string(name) + "' (expected rule, assoc or m3gm)");
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ArtifactMismatchError*>(&e)) return 4;
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const TrainingError*>(&e)) return 5;
    if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const GraphError*>(&e) ||
        dynamic_cast<const DimensionError*>(&e)) {
        return 3;
    }
    return 1;
}

namespace {

constexpr std::string_view kDatasetMagic = "# m3gm-dataset";
constexpr std::string_view kAlphaMagic = "# m3gm-alpha";
constexpr std::string_view kReportMagic = "# m3gm-report";

[[noreturn]] void rethrow_in_stage(const char* name) {
    const auto prefixed = [name](const std::exception& e) { return std::string(name) + ": " + e.what(); };
    try {
        throw;
    } catch (const ArtifactMismatchError& e) {
        throw ArtifactMismatchError(prefixed(e));
    } catch (const ConfigError& e) {
        throw ConfigError(prefixed(e));
    } catch (const TrainingError& e) {
        throw TrainingError(prefixed(e));
    } catch (const GraphError& e) {
        throw GraphError(prefixed(e));
    } catch (const DimensionError& e) {
        throw DimensionError(prefixed(e));
    } catch (const FormatError& e) {
        throw FormatError(prefixed(e));
    } catch (const Error& e) {
        throw Error(prefixed(e));
    }
}

void require_hash(const std::string& artifact, const std::string& found, const std::string& expected) {
    if (found != expected) {
        throw ArtifactMismatchError(artifact + " was produced under config " + found + " but the current config is " +
                                    expected + "; rerun the stage that produces it");
    }
}

/// Reads a "<magic>\tconfig=<hash>" first line and returns the hash.
std::string read_stamp(std::istream& is, std::string_view magic, const std::string& path) {
    std::string line;
    if (!std::getline(is, line) || !line.starts_with(magic)) {
        throw FormatError(path + ": missing '" + std::string(magic) + "' header");
    }
    const auto pos = line.find("config=");
    if (pos == std::string::npos) throw FormatError(path + ": header carries no config hash");
    auto hash = line.substr(pos + 7);
    return hash.substr(0, hash.find('\t'));
}

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

struct Pipeline::Cache {
    std::optional<DatasetBundle> bundle;
    std::optional<FeatureRegistry> registry;
    std::optional<FilterSet> filter;
    std::optional<AssociationModel> assoc;
    std::optional<AssociationModel> tuned;
    std::optional<GraphWeights> weights;
    std::optional<AlphaTable> alpha;
};

Pipeline::Pipeline(RunConfig cfg, std::ostream& log)
    : cfg_(std::move(cfg)), ws_{cfg_.work_dir}, log_(log), cache_(std::make_unique<Cache>()) {
    cfg_.validate();
}

Pipeline::~Pipeline() = default;

template <typename Fn>
auto Pipeline::stage(const char* name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    log_ << "[" << name << "] start\n";
    auto finish = [&] {
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
        log_ << "[" << name << "] done in " << fixed(dt.count()) << " s\n";
    };
    try {
        if constexpr (std::is_void_v<std::invoke_result_t<Fn>>) {
            fn();
            finish();
        } else {
            auto result = fn();
            finish();
            return result;
        }
    } catch (const Error&) {
        rethrow_in_stage(name);
    }
}

void Pipeline::save_config() const {
    std::filesystem::create_directories(ws_.root);
    auto out = open_output(ws_.config());
    cfg_.write(out);
}

void Pipeline::ingest() {
    stage("ingest", [&] {
        if (cfg_.train.empty() || cfg_.dev.empty() || cfg_.test.empty()) {
            throw ConfigError("train, dev and test paths must all be set");
        }
        auto bundle = ingest_files(cfg_.train, cfg_.dev, cfg_.test, parse_symmetric_list(cfg_.symmetric));
        const auto& s = bundle.stats;
        const auto& rel = bundle.relations();
        log_ << "  train " << bundle.train.edge_count() << " triples from " << s.train_lines << " lines\n";
        log_ << "  dev " << bundle.dev.size() << " triples from " << s.dev_lines << " lines\n";
        log_ << "  test " << bundle.test.size() << " triples from " << s.test_lines << " lines\n";
        log_ << "  " << bundle.nodes.size() << " entities, " << rel.size() << " relations (symmetric:";
        for (std::size_t r = 0; r < rel.size(); ++r) {
            if (rel.symmetric[r]) log_ << ' ' << rel.names[r];
        }
        log_ << ")\n";
        if (s.train_self_loops) log_ << "  " << s.train_self_loops << " self-loops kept in train\n";
        if (s.eval_self_loops_dropped) log_ << "  " << s.eval_self_loops_dropped << " dev/test self-loops dropped\n";
        if (s.unseen_eval_entities) {
            log_ << "  warning: " << s.unseen_eval_entities << " dev/test entities do not occur in train\n";
        }

        save_bundle(ws_.dataset(), bundle);
        auto manifest = open_output(ws_.dataset_manifest());
        manifest << kDatasetMagic << "\tconfig=" << cfg_.hash(Stage::Dataset) << '\n';
        manifest << "entities\t" << bundle.nodes.size() << '\n';
        manifest << "relations\t" << rel.size() << '\n';
        manifest << "train\t" << bundle.train.edge_count() << '\n';
        manifest << "dev\t" << bundle.dev.size() << '\n';
        manifest << "test\t" << bundle.test.size() << '\n';
        save_config();
        cache_ = std::make_unique<Cache>();
        cache_->bundle = std::move(bundle);
    });
}

const DatasetBundle& Pipeline::bundle() {
    if (!cache_->bundle) {
        auto in = open_input(ws_.dataset_manifest());
        require_hash(ws_.dataset(), read_stamp(in, kDatasetMagic, ws_.dataset_manifest()),
                     cfg_.hash(Stage::Dataset));
        cache_->bundle = load_bundle(ws_.dataset());
    }
    return *cache_->bundle;
}

const FeatureRegistry& Pipeline::registry() {
    if (!cache_->registry) cache_->registry.emplace(build_registry(bundle().relations()));
    return *cache_->registry;
}

const FilterSet& Pipeline::filter() {
    if (!cache_->filter) {
        const auto& b = bundle();
        FilterSet f(b.nodes.size(), b.relations());
        f.add_all(b.train);
        for (const auto& e : b.dev) f.add(e);
        for (const auto& e : b.test) f.add(e);
        cache_->filter = std::move(f);
    }
    return *cache_->filter;
}

void Pipeline::train_association() {
    stage("train-assoc", [&] {
        const auto& b = bundle();
        const auto seed = stage_seed(cfg_.seed, "embeddings");
        SynsetEmbeddings emb;
        if (!cfg_.synset_vectors.empty()) {
            emb = load_synset_vectors(cfg_.synset_vectors, b.nodes, cfg_.dim);
        } else if (!cfg_.vectors.empty()) {
            const auto wv = WordVectorTable::load(cfg_.vectors);
            std::optional<LemmaTable> lemmas;
            if (!cfg_.lemmas.empty()) lemmas = load_lemma_file(cfg_.lemmas);
            emb = build_synset_embeddings(b.nodes, lemmas ? &*lemmas : nullptr, wv, cfg_.dim, seed);
        } else {
            emb = random_synset_embeddings(b.nodes.size(), cfg_.dim, seed);
        }
        const auto& c = emb.coverage;
        log_ << "  embeddings: " << c.averaged << " averaged (" << fixed(c.percent(c.averaged)) << "%), " << c.loaded
             << " loaded, " << c.random << " random; " << c.covered_tokens << "/" << c.tokens
             << " lemma tokens covered\n";

        const auto result = m3gm::train_association(b.train, emb, cfg_.assoc_config(), b.dev, filter());
        for (const auto& e : result.log) {
            log_ << "  epoch " << e.epoch << " loss " << fixed(e.loss, 4) << " dev MRR " << fixed(e.dev_mrr)
                 << (e.included_symmetric ? " (+symmetric)" : "") << '\n';
        }
        log_ << "  best epoch " << result.best_epoch << ", dev MRR " << fixed(result.best_dev_mrr) << '\n';

        std::filesystem::create_directories(ws_.root);
        auto out = open_output(ws_.association());
        write_association(out, result.model, b.nodes, cfg_.hash(Stage::Association));
        save_config();
        cache_->assoc = result.model;
        cache_->tuned.reset();
        cache_->weights.reset();
        cache_->alpha.reset();
    });
}

namespace {

AssociationModel load_association(const std::string& path, const std::string& expected_hash,
                                  const Interner& nodes) {
    auto in = open_input(path);
    auto snap = read_association(in);
    require_hash(path, snap.config_hash, expected_hash);
    if (snap.node_names != nodes.names()) {
        throw ArtifactMismatchError(path + " was trained over a different entity table");
    }
    return std::move(snap.model);
}

}  // namespace

const AssociationModel& Pipeline::association() {
    if (!cache_->assoc) {
        cache_->assoc = load_association(ws_.association(), cfg_.hash(Stage::Association), bundle().nodes);
    }
    return *cache_->assoc;
}

const AssociationModel& Pipeline::ranking_association() {
    if (!cfg_.fine_tune) return association();
    if (!cache_->tuned) {
        cache_->tuned = load_association(ws_.tuned_association(), cfg_.hash(Stage::Graph), bundle().nodes);
    }
    return *cache_->tuned;
}

void Pipeline::train_graph() {
    stage("train-m3gm", [&] {
        const auto& b = bundle();
        const MultiRelGraph base = cfg_.train_only ? b.train : b.train_and_dev();
        log_ << "  " << registry().size() << " motif features over " << base.edge_count() << " edges\n";
        const auto result = train_m3gm(base, association(), registry(), cfg_.m3gm_config());
        for (const auto& e : result.epochs) {
            log_ << "  epoch " << e.epoch << ": " << e.samples << " samples, " << e.active << " active, hinge "
                 << fixed(e.hinge, 4) << ", |theta| " << fixed(e.theta_norm_start, 4) << " -> "
                 << fixed(e.theta_norm_end, 4) << '\n';
        }
        const auto hash = cfg_.hash(Stage::Graph);
        auto out = open_output(ws_.weights());
        write_weights(out, result.weights, registry(), b.relations(), hash);
        if (result.tuned_association) {
            auto tuned = open_output(ws_.tuned_association());
            write_association(tuned, *result.tuned_association, b.nodes, hash);
            cache_->tuned = result.tuned_association;
        }
        save_config();
        cache_->weights = result.weights;
        cache_->alpha.reset();
    });
}

const GraphWeights& Pipeline::weights() {
    if (!cache_->weights) {
        auto in = open_input(ws_.weights());
        auto snap = read_weights(in, registry(), bundle().relations());
        require_hash(ws_.weights(), snap.config_hash, cfg_.hash(Stage::Graph));
        cache_->weights = std::move(snap.weights);
    }
    return *cache_->weights;
}

void Pipeline::tune_alpha() {
    stage("tune-alpha", [&] {
        const auto& b = bundle();
        const auto features = count_all(b.train, registry());
        const RerankContext ctx{&b.train, &registry(), &features, &weights().theta};
        const auto instances = make_instances(b.dev);
        auto table = m3gm::tune_alpha(instances, ranking_association(), filter(), ctx, cfg_.k, cfg_.threads);
        for (const auto& w : table.warnings) log_ << "  warning: " << w << '\n';
        for (std::size_t r = 0; r < table.alpha.size(); ++r) {
            log_ << "  " << b.relations().names[r] << " alpha " << fixed(table.alpha[r]) << '\n';
        }
        auto out = open_output(ws_.alpha());
        out << kAlphaMagic << "\tconfig=" << cfg_.hash(Stage::Alpha) << '\n';
        write_alpha(out, table, b.relations());
        save_config();
        cache_->alpha = std::move(table);
    });
}

const AlphaTable& Pipeline::alpha() {
    if (!cache_->alpha) {
        auto in = open_input(ws_.alpha());
        require_hash(ws_.alpha(), read_stamp(in, kAlphaMagic, ws_.alpha()), cfg_.hash(Stage::Alpha));
        cache_->alpha = read_alpha(in, bundle().relations());
    }
    return *cache_->alpha;
}

EvalReport Pipeline::evaluate(SystemKind system, bool per_relation) {
    const std::string name = std::string("eval-") + to_string(system);
    return stage(name.c_str(), [&] {
        const auto& b = bundle();
        const auto instances = make_instances(b.test);
        EvalSystem sys;
        sys.k = cfg_.k;
        std::optional<MultiRelGraph> base;
        std::optional<FeatureVector> features;
        RerankContext ctx;
        if (system == SystemKind::Association) sys.assoc = &association();
        if (system == SystemKind::Graph) {
            base = cfg_.train_only ? b.train : b.train_and_dev();
            features.emplace(count_all(*base, registry()));
            ctx = RerankContext{&*base, &registry(), &*features, &weights().theta};
            sys.assoc = &ranking_association();
            sys.rerank = &ctx;
            sys.alpha = &alpha();
        }
        auto report = m3gm::evaluate(sys, instances, b.train, filter(), b.relations(), cfg_.eval_options());
        log_ << "  " << report.overall.count << " instances, MRR " << fixed(report.overall.mrr) << ", rule fired "
             << report.rule_fired << "/" << report.rule_instances << '\n';
        auto out = open_output(ws_.report(system));
        out << kReportMagic << "\tsystem=" << to_string(system) << "\tconfig=" << cfg_.hash(Stage::Eval) << '\n';
        write_report(out, report, per_relation);
        save_config();
        return report;
    });
}

void Pipeline::rerank(std::ostream& out, const std::string& alpha_path) {
    stage("rerank", [&] {
        const auto& b = bundle();
        AlphaTable table;
        if (alpha_path.empty()) {
            table = alpha();
        } else {
            auto in = open_input(alpha_path);
            table = read_alpha(in, b.relations());
        }
        const auto base = cfg_.train_only ? b.train : b.train_and_dev();
        const auto features = count_all(base, registry());
        const RerankContext ctx{&base, &registry(), &features, &weights().theta};
        const auto& assoc = ranking_association();
        const auto& rel = b.relations();
        std::size_t skipped = 0;
        for (const auto& inst : make_instances(b.test)) {
            const auto r = inst.edge.relation;
            if (rel.is_symmetric(r)) continue;
            const auto scores = assoc.score_all(inst.query(), r, inst.direction);
            const auto top = top_candidates(scores, inst.query(), r, inst.direction, filter(), inst.gold(), cfg_.k);
            const auto res = m3gm::rerank(top, inst, ctx, table[r]);
            skipped += res.skipped;
            std::string gold_rank = "-";
            for (std::size_t i = 0; i < res.ranked.size(); ++i) {
                if (res.ranked[i].node == inst.gold()) gold_rank = std::to_string(i + 1);
            }
            out << b.nodes.name(inst.query()) << '\t' << rel.names[r] << '\t' << to_string(inst.direction) << '\t'
                << b.nodes.name(inst.gold()) << '\t' << gold_rank << '\t';
            for (std::size_t i = 0; i < res.ranked.size(); ++i) {
                out << (i ? " " : "") << b.nodes.name(res.ranked[i].node);
            }
            out << '\n';
        }
        if (skipped) log_ << "  " << skipped << " candidates already in the graph kept their association order\n";
    });
}

void Pipeline::count_motifs(std::ostream& out, bool all) {
    stage("count-motifs", [&] {
        const auto& b = bundle();
        const auto& reg = registry();
        const auto features = count_all(b.train, reg);
        log_ << "  registry size " << reg.size() << '\n';
        for (std::size_t i = 0; i < reg.size(); ++i) {
            if (!all && features.count(i) == 0) continue;
            out << template_name(reg.feature(i).kind) << '\t' << reg.relation_label(i, b.relations()) << '\t'
                << format_double(features.value(i)) << '\n';
        }
    });
}

void Pipeline::inspect_weights(std::ostream& out, std::size_t top) {
    stage("inspect-weights", [&] {
        const auto& reg = registry();
        const auto& w = weights();
        for (auto i : top_weights(w, top)) {
            out << template_name(reg.feature(i).kind) << '\t' << reg.relation_label(i, bundle().relations()) << '\t'
                << format_double(w.theta[static_cast<Eigen::Index>(i)]) << '\n';
        }
    });
}

PipelineResult Pipeline::run(bool per_relation) {
    ingest();
    train_association();
    train_graph();
    tune_alpha();
    PipelineResult result;
    result.rule = evaluate(SystemKind::Rule, per_relation);
    result.association = evaluate(SystemKind::Association, per_relation);
    result.graph = evaluate(SystemKind::Graph, per_relation);
    return result;
}

}  // namespace m3gm
