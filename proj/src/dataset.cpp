#include "m3gm/dataset.hpp"

#include "m3gm/io_util.hpp"

#include <algorithm>
#include <filesystem>
#include <istream>
#include <ostream>
#include <set>

namespace m3gm {

const std::vector<std::string>& default_symmetric_relations() {
    static const std::vector<std::string> names = {"also_see", "derivationally_related_form", "similar_to",
                                                   "verb_group"};
    return names;
}

namespace {

std::string_view strip_underscore(std::string_view s) {
    if (!s.empty() && s.front() == '_') s.remove_prefix(1);
    return s;
}

struct RawTriple {
    std::string source, relation, target;
    std::size_t line;
};

std::vector<RawTriple> read_raw(const NamedInput& in, std::size_t& line_count) {
    std::vector<RawTriple> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(*in.stream, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
            throw FormatError(in.name + ":" + std::to_string(line_no) + ": expected 3 tab-separated fields, found " +
                              std::to_string(fields.size()));
        }
        out.push_back({std::move(fields[0]), std::move(fields[1]), std::move(fields[2]), line_no});
    }
    line_count = out.size();
    return out;
}

}  // namespace

bool names_relation(const std::vector<std::string>& names, std::string_view relation) {
    const auto bare = strip_underscore(relation);
    return std::any_of(names.begin(), names.end(), [&](const std::string& n) { return strip_underscore(n) == bare; });
}

std::vector<std::string> parse_symmetric_list(std::string_view list) {
    std::vector<std::string> out;
    for (auto& name : split(list, ',')) {
        const auto b = name.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        const auto e = name.find_last_not_of(" \t");
        out.push_back(name.substr(b, e - b + 1));
    }
    return out.empty() ? default_symmetric_relations() : out;
}

MultiRelGraph DatasetBundle::train_and_dev() const {
    MultiRelGraph g = train;
    for (const auto& e : dev) g.add_edge(e);
    return g;
}

DatasetBundle ingest(NamedInput train, NamedInput dev, NamedInput test, const std::vector<std::string>& symmetric) {
    DatasetBundle bundle;
    const auto raw_train = read_raw(train, bundle.stats.train_lines);
    const auto raw_dev = read_raw(dev, bundle.stats.dev_lines);
    const auto raw_test = read_raw(test, bundle.stats.test_lines);

    std::set<std::string> relation_names;
    for (const auto& t : raw_train) relation_names.insert(t.relation);
    RelationTable relations;
    for (const auto& name : relation_names) relations.add(name, names_relation(symmetric, name));

    for (const auto& t : raw_train) {
        bundle.nodes.intern(t.source);
        bundle.nodes.intern(t.target);
    }
    const std::size_t train_nodes = bundle.nodes.size();
    for (const auto* split_rows : {&raw_dev, &raw_test}) {
        for (const auto& t : *split_rows) {
            bundle.nodes.intern(t.source);
            bundle.nodes.intern(t.target);
        }
    }
    bundle.stats.unseen_eval_entities = bundle.nodes.size() - train_nodes;

    std::set<Edge> seen;
    auto resolve = [&](const RawTriple& t, const NamedInput& in) {
        const auto r = relations.find(t.relation);
        if (!r) {
            throw FormatError(in.name + ":" + std::to_string(t.line) + ": relation '" + t.relation +
                              "' does not occur in the training split");
        }
        const Edge e{*bundle.nodes.find(t.source), *r, *bundle.nodes.find(t.target)};
        if (!seen.insert(e).second) {
            throw FormatError(in.name + ":" + std::to_string(t.line) + ": duplicate triple " + t.source + " " +
                              t.relation + " " + t.target);
        }
        return e;
    };

    bundle.train = MultiRelGraph(bundle.nodes.size(), relations);
    for (const auto& t : raw_train) {
        const auto e = resolve(t, train);
        bundle.stats.train_self_loops += e.is_loop();
        bundle.train.add_edge(e);
    }
    auto fill = [&](const std::vector<RawTriple>& rows, const NamedInput& in, std::vector<Edge>& out) {
        for (const auto& t : rows) {
            const auto e = resolve(t, in);
            if (e.is_loop()) {
                ++bundle.stats.eval_self_loops_dropped;
                continue;
            }
            out.push_back(e);
        }
    };
    fill(raw_dev, dev, bundle.dev);
    fill(raw_test, test, bundle.test);
    return bundle;
}

DatasetBundle ingest_files(const std::string& train, const std::string& dev, const std::string& test,
                           const std::vector<std::string>& symmetric) {
    auto tr = open_input(train);
    auto dv = open_input(dev);
    auto ts = open_input(test);
    return ingest({train, &tr}, {dev, &dv}, {test, &ts}, symmetric);
}

void write_triples(std::ostream& os, std::span<const Edge> edges, const Interner& nodes,
                   const RelationTable& relations) {
    for (const auto& e : edges) {
        os << nodes.name(e.source) << '\t' << relations.names.at(e.relation) << '\t' << nodes.name(e.target) << '\n';
    }
}

void save_bundle(const std::string& dir, const DatasetBundle& bundle) {
    std::filesystem::create_directories(dir);
    {
        auto out = open_output(dir + "/train.graph");
        write_graph(out, bundle.train, bundle.nodes);
    }
    {
        auto out = open_output(dir + "/dev.tsv");
        write_triples(out, bundle.dev, bundle.nodes, bundle.relations());
    }
    auto out = open_output(dir + "/test.tsv");
    write_triples(out, bundle.test, bundle.nodes, bundle.relations());
}

namespace {

std::vector<Edge> read_named_triples(const std::string& path, const Interner& nodes, const RelationTable& relations) {
    auto in = open_input(path);
    std::size_t count = 0;
    std::vector<Edge> out;
    for (const auto& t : read_raw({path, &in}, count)) {
        const auto s = nodes.find(t.source);
        const auto r = relations.find(t.relation);
        const auto o = nodes.find(t.target);
        if (!s || !r || !o) {
            throw FormatError(path + ":" + std::to_string(t.line) + ": triple does not match the bundle graph");
        }
        out.push_back({*s, *r, *o});
    }
    return out;
}

}  // namespace

DatasetBundle load_bundle(const std::string& dir) {
    auto in = open_input(dir + "/train.graph");
    auto snap = read_graph(in);
    DatasetBundle bundle;
    bundle.nodes = std::move(snap.nodes);
    bundle.train = std::move(snap.graph);
    bundle.dev = read_named_triples(dir + "/dev.tsv", bundle.nodes, bundle.relations());
    bundle.test = read_named_triples(dir + "/test.tsv", bundle.nodes, bundle.relations());
    bundle.stats.train_lines = bundle.train.edge_count();
    bundle.stats.dev_lines = bundle.dev.size();
    bundle.stats.test_lines = bundle.test.size();
    return bundle;
}

}  // namespace m3gm
