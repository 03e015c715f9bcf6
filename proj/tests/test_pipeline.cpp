#include "m3gm/config.hpp"
#include "m3gm/dataset.hpp"
#include "m3gm/pipeline.hpp"

#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

using namespace m3gm;
namespace fs = std::filesystem;

namespace {

const std::string kToy = std::string(M3GM_TEST_DATA) + "/toy20";

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("m3gm-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string str() const { return path_.string(); }

private:
    fs::path path_;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig toy_config(const std::string& work_dir) {
    RunConfig cfg;
    cfg.train = kToy + "/train.tsv";
    cfg.dev = kToy + "/dev.tsv";
    cfg.test = kToy + "/test.tsv";
    cfg.work_dir = work_dir;
    cfg.dim = 16;
    cfg.max_epochs = 30;
    return cfg;
}

DatasetBundle ingest_strings(const std::string& train, const std::string& dev, const std::string& test,
                             const std::vector<std::string>& symmetric = default_symmetric_relations()) {
    std::istringstream tr(train), dv(dev), ts(test);
    return ingest({"train.tsv", &tr}, {"dev.tsv", &dv}, {"test.tsv", &ts}, symmetric);
}

std::string error_of(auto&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("three well-formed lines give a three-edge graph") {
    const auto b = ingest_strings("a\t_hypernym\tb\nb\t_hypernym\tc\nc\t_also_see\ta\n", "", "");
    CHECK(b.train.edge_count() == 3);
    CHECK(b.nodes.size() == 3);
    CHECK(b.relations().size() == 2);
    const auto also_see = b.relations().find("_also_see");
    REQUIRE(also_see);
    CHECK(b.relations().is_symmetric(*also_see));
    CHECK_FALSE(b.relations().is_symmetric(*b.relations().find("_hypernym")));
}

TEST_CASE("a two-field line is rejected with its line number") {
    const auto msg = error_of([] { ingest_strings("a\t_hypernym\tb\nb\t_hypernym\n", "", ""); });
    CHECK(msg.find("train.tsv:2") != std::string::npos);
    CHECK_THROWS_AS(ingest_strings("a\t_hypernym\tb\nb\t_hypernym\n", "", ""), FormatError);
}

TEST_CASE("ingest rejects unknown dev relations and repeated triples") {
    const std::string train = "a\tr\tb\nb\tr\tc\n";
    CHECK(error_of([&] { ingest_strings(train, "a\tq\tc\n", ""); }).find("dev.tsv:1") != std::string::npos);
    CHECK(error_of([&] { ingest_strings(train + "a\tr\tb\n", "", ""); }).find("train.tsv:3") != std::string::npos);
    CHECK(error_of([&] { ingest_strings(train, "", "\nb\tr\tc\n"); }).find("test.tsv:2") != std::string::npos);
}

TEST_CASE("dev and test self-loops are dropped, train self-loops kept") {
    const auto b = ingest_strings("a\tr\tb\nb\tr\tb\n", "a\tr\ta\nb\tr\ta\n", "c\tr\tc\n");
    CHECK(b.train.edge_count() == 2);
    CHECK(b.stats.train_self_loops == 1);
    CHECK(b.dev.size() == 1);
    CHECK(b.test.empty());
    CHECK(b.stats.eval_self_loops_dropped == 2);
    CHECK(b.stats.unseen_eval_entities == 1);
}

TEST_CASE("symmetric names match with or without underscore and can be overridden") {
    CHECK(names_relation(default_symmetric_relations(), "_verb_group"));
    CHECK(names_relation(default_symmetric_relations(), "similar_to"));
    CHECK_FALSE(names_relation(default_symmetric_relations(), "_hypernym"));
    CHECK(parse_symmetric_list("") == default_symmetric_relations());

    const auto b = ingest_strings("a\t_hypernym\tb\nb\t_also_see\ta\n", "", "", parse_symmetric_list("_hypernym"));
    CHECK(b.relations().is_symmetric(*b.relations().find("_hypernym")));
    CHECK_FALSE(b.relations().is_symmetric(*b.relations().find("_also_see")));
}

TEST_CASE("triple counts agree with file line counts") {
    const auto b = ingest_files(kToy + "/train.tsv", kToy + "/dev.tsv", kToy + "/test.tsv");
    auto lines = [](const std::string& path) {
        const auto text = slurp(path);
        return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
    };
    CHECK(b.train.edge_count() == lines(kToy + "/train.tsv"));
    CHECK(b.dev.size() == lines(kToy + "/dev.tsv"));
    CHECK(b.test.size() == lines(kToy + "/test.tsv"));
    CHECK(b.nodes.size() == 20);
    CHECK(b.stats.unseen_eval_entities == 0);
}

TEST_CASE("bundle directory round trip") {
    TempDir dir;
    const auto b = ingest_files(kToy + "/train.tsv", kToy + "/dev.tsv", kToy + "/test.tsv");
    save_bundle(dir.str(), b);
    const auto c = load_bundle(dir.str());
    CHECK(c.nodes == b.nodes);
    CHECK(c.train == b.train);
    CHECK(c.dev == b.dev);
    CHECK(c.test == b.test);
}

TEST_CASE("run config text, environment and hashing") {
    RunConfig cfg;
    std::istringstream text("# comment\nmodel = bilin\ndim=50\nlambda = 0.25  # inline\nfine_tune = true\n");
    cfg.read(text);
    CHECK(cfg.model == "bilin");
    CHECK(cfg.dim == 50);
    CHECK(cfg.lambda == 0.25);
    CHECK(cfg.fine_tune);

    std::ostringstream out;
    cfg.write(out);
    RunConfig back;
    std::istringstream in(out.str());
    back.read(in);
    CHECK(back.hash() == cfg.hash());

    const std::map<std::string, std::string> env = {{"M3GM_DIM", "64"}, {"M3GM_FALLBACK", "expected-rank"}};
    cfg.apply_env([&](const char* name) -> const char* {
        const auto it = env.find(name);
        return it == env.end() ? nullptr : it->second.c_str();
    });
    CHECK(cfg.dim == 64);
    CHECK(cfg.fallback == "expected-rank");

    CHECK_THROWS_AS(cfg.set("no_such_key", "1"), ConfigError);
    CHECK_THROWS_AS(cfg.set("dim", "-3"), ConfigError);
    CHECK_THROWS_AS(cfg.set("fine_tune", "maybe"), ConfigError);

    SUBCASE("work_dir and threads do not change the hash") {
        auto other = cfg;
        other.work_dir = "elsewhere";
        other.threads = 8;
        CHECK(other.hash() == cfg.hash());
    }
    SUBCASE("a setting changes its own stage and every later one") {
        auto other = cfg;
        other.k = 50;
        CHECK(other.hash(Stage::Graph) == cfg.hash(Stage::Graph));
        CHECK(other.hash(Stage::Alpha) != cfg.hash(Stage::Alpha));
        CHECK(other.hash(Stage::Eval) != cfg.hash(Stage::Eval));
        other = cfg;
        other.seed = 2;
        CHECK(other.hash(Stage::Dataset) == cfg.hash(Stage::Dataset));
        CHECK(other.hash(Stage::Association) != cfg.hash(Stage::Association));
    }
}

TEST_CASE("toy pipeline completes quickly and produces every artifact") {
    TempDir dir;
    std::ostringstream log;
    const auto start = std::chrono::steady_clock::now();
    Pipeline p(toy_config(dir.str()), log);
    const auto result = p.run();
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    CHECK(elapsed.count() < 10.0);

    const auto& ws = p.workspace();
    for (const auto& path : {ws.config(), ws.dataset_manifest(), ws.association(), ws.weights(), ws.alpha(),
                             ws.report(SystemKind::Rule), ws.report(SystemKind::Association),
                             ws.report(SystemKind::Graph)}) {
        CHECK_MESSAGE(fs::exists(path), path);
    }
    CHECK(result.graph.overall.count == 12);
    CHECK(result.rule.rule_instances == 12);
    CHECK(result.association.rule_instances == 0);
    CHECK(result.graph.overall.mrr > 0.0);
    CHECK(log.str().find("[tune-alpha] done") != std::string::npos);
}

TEST_CASE("same seed reproduces the weight snapshot byte for byte") {
    TempDir a, b;
    std::ostringstream log;
    Pipeline pa(toy_config(a.str()), log);
    Pipeline pb(toy_config(b.str()), log);
    const auto ra = pa.run(true);
    const auto rb = pb.run(true);
    CHECK(slurp(pa.workspace().weights()) == slurp(pb.workspace().weights()));
    CHECK(slurp(pa.workspace().association()) == slurp(pb.workspace().association()));
    CHECK(ra.graph == rb.graph);
    CHECK(ra.rule == rb.rule);
    CHECK(slurp(pa.workspace().report(SystemKind::Graph)) == slurp(pb.workspace().report(SystemKind::Graph)));

    TempDir c;
    auto cfg = toy_config(c.str());
    cfg.seed = 99;
    Pipeline pc(cfg, log);
    pc.run();
    CHECK(slurp(pc.workspace().weights()) != slurp(pa.workspace().weights()));
}

TEST_CASE("evaluating saved artifacts equals the in-pipeline report") {
    TempDir dir;
    std::ostringstream log;
    EvalReport in_pipeline;
    std::string report_file;
    {
        Pipeline p(toy_config(dir.str()), log);
        in_pipeline = p.run().graph;
        report_file = slurp(p.workspace().report(SystemKind::Graph));
    }
    Pipeline fresh(toy_config(dir.str()), log);
    CHECK(fresh.evaluate(SystemKind::Graph) == in_pipeline);
    CHECK(slurp(fresh.workspace().report(SystemKind::Graph)) == report_file);

    auto threaded = toy_config(dir.str());
    threaded.threads = 4;
    Pipeline parallel(threaded, log);
    CHECK(parallel.evaluate(SystemKind::Graph) == in_pipeline);
}

TEST_CASE("artifacts from a different configuration are refused") {
    TempDir dir;
    std::ostringstream log;
    Pipeline(toy_config(dir.str()), log).run();

    auto changed = toy_config(dir.str());
    changed.lambda = 0.5;
    Pipeline p(changed, log);
    try {
        p.evaluate(SystemKind::Graph);
        FAIL("expected a mismatch");
    } catch (const ArtifactMismatchError& e) {
        CHECK(std::string(e.what()).starts_with("eval-m3gm: "));
        CHECK(exit_code_for(e) == 4);
    }
    CHECK(p.evaluate(SystemKind::Association).overall.count == 12);

    p.train_graph();
    p.tune_alpha();
    CHECK_NOTHROW(p.evaluate(SystemKind::Graph));
}

TEST_CASE("fine-tuning writes and ranks with the tuned association model") {
    TempDir dir;
    std::ostringstream log;
    auto cfg = toy_config(dir.str());
    cfg.fine_tune = true;
    Pipeline p(cfg, log);
    const auto result = p.run();
    CHECK(fs::exists(p.workspace().tuned_association()));
    Pipeline fresh(cfg, log);
    CHECK(fresh.evaluate(SystemKind::Graph) == result.graph);
}

TEST_CASE("exit codes follow the error class") {
    CHECK(exit_code_for(ConfigError("x")) == 2);
    CHECK(exit_code_for(FormatError("x")) == 3);
    CHECK(exit_code_for(DuplicateEdgeError("x")) == 3);
    CHECK(exit_code_for(ArtifactMismatchError("x")) == 4);
    CHECK(exit_code_for(TrainingError("x")) == 5);
    CHECK(exit_code_for(std::runtime_error("x")) == 1);
}

TEST_CASE("missing data paths are a configuration error named by stage") {
    TempDir dir;
    std::ostringstream log;
    RunConfig cfg;
    cfg.work_dir = dir.str();
    Pipeline p(cfg, log);
    CHECK(error_of([&] { p.ingest(); }).starts_with("ingest: "));
    CHECK_THROWS_AS(p.ingest(), ConfigError);
    CHECK_THROWS_AS(p.train_association(), FormatError);
}
