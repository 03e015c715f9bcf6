#include "m3gm/graph.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace m3gm {

namespace {

constexpr const char* kMagic = "m3gm-graph";
constexpr int kVersion = 1;

std::string next_line(std::istream& is, const char* what) {
    std::string line;
    if (!std::getline(is, line)) throw FormatError(std::string("graph snapshot truncated at ") + what);
    return line;
}

std::size_t expect_count(std::istream& is, const std::string& key) {
    std::istringstream ss(next_line(is, key.c_str()));
    std::string k;
    std::size_t n = 0;
    if (!(ss >> k >> n) || k != key) throw FormatError("graph snapshot: expected '" + key + "' header");
    return n;
}

}  // namespace

void write_graph(std::ostream& os, const MultiRelGraph& g, const Interner& nodes) {
    if (nodes.size() != g.node_count()) throw FormatError("node name table does not match graph");
    os << kMagic << '\t' << kVersion << '\n';
    os << "nodes\t" << g.node_count() << '\n';
    for (const auto& name : nodes.names()) os << name << '\n';
    const auto& rel = g.relations();
    os << "relations\t" << rel.size() << '\n';
    for (std::size_t r = 0; r < rel.size(); ++r) {
        os << rel.names[r] << '\t' << (rel.symmetric[r] ? 1 : 0) << '\n';
    }
    const auto edges = g.edges();
    os << "edges\t" << edges.size() << '\n';
    for (const auto& e : edges) {
        os << e.source << '\t' << static_cast<unsigned>(e.relation) << '\t' << e.target << '\n';
    }
}

GraphSnapshot read_graph(std::istream& is) {
    {
        std::istringstream ss(next_line(is, "magic"));
        std::string magic;
        int version = 0;
        if (!(ss >> magic >> version) || magic != kMagic || version != kVersion) {
            throw FormatError("not an m3gm graph snapshot");
        }
    }
    GraphSnapshot snap;
    const std::size_t n = expect_count(is, "nodes");
    for (std::size_t i = 0; i < n; ++i) {
        const auto name = next_line(is, "node names");
        if (snap.nodes.intern(name) != i) throw FormatError("duplicate node name '" + name + "'");
    }
    RelationTable relations;
    const std::size_t nr = expect_count(is, "relations");
    for (std::size_t i = 0; i < nr; ++i) {
        const auto line = next_line(is, "relations");
        const auto tab = line.rfind('\t');
        if (tab == std::string::npos) throw FormatError("bad relation record '" + line + "'");
        relations.add(line.substr(0, tab), line.substr(tab + 1) == "1");
    }
    snap.graph = MultiRelGraph(n, std::move(relations));
    const std::size_t ne = expect_count(is, "edges");
    for (std::size_t i = 0; i < ne; ++i) {
        std::istringstream ss(next_line(is, "edges"));
        std::uint64_t s = 0, r = 0, t = 0;
        if (!(ss >> s >> r >> t)) throw FormatError("bad edge record " + std::to_string(i));
        snap.graph.add_edge({static_cast<NodeId>(s), static_cast<RelationId>(r), static_cast<NodeId>(t)});
    }
    return snap;
}

}  // namespace m3gm
