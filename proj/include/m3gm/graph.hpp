#ifndef M3GM_GRAPH_HPP_
#define M3GM_GRAPH_HPP_

#include "m3gm/types.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace m3gm {

/// Bidirectional map between external names and dense handles 0..size()-1.
class Interner {
public:
    NodeId intern(std::string_view name);
    std::optional<NodeId> find(std::string_view name) const;
    const std::string& name(NodeId id) const { return names_.at(id); }
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

    friend bool operator==(const Interner& a, const Interner& b) { return a.names_ == b.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, NodeId> index_;
};

struct RelationTable {
    std::vector<std::string> names;
    std::vector<bool> symmetric;

    RelationId add(std::string_view name, bool is_symmetric);
    std::optional<RelationId> find(std::string_view name) const;
    std::size_t size() const { return names.size(); }
    bool is_symmetric(RelationId r) const { return symmetric.at(r); }

    friend bool operator==(const RelationTable&, const RelationTable&) = default;
};

struct Neighbor {
    NodeId node;
    RelationId relation;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
    friend auto operator<=>(const Neighbor&, const Neighbor&) = default;
};

/// Directed labeled multigraph over a fixed node set.
///
/// Each node keeps its out- and in-neighbors in a vector sorted by
/// (neighbor, relation), plus per-relation degree counters. A hash index maps
/// every connected ordered node pair to the bitmask of relations linking it,
/// which gives O(1) membership and lets motif code enumerate all relations
/// between two nodes in one lookup.
///
/// Self-loops may be stored; the motif layer ignores them.
class MultiRelGraph {
public:
    MultiRelGraph() = default;
    MultiRelGraph(std::size_t node_count, RelationTable relations);

    std::size_t node_count() const { return node_count_; }
    std::size_t relation_count() const { return relations_.size(); }
    const RelationTable& relations() const { return relations_; }

    std::size_t edge_count() const { return edge_total_; }
    std::size_t edge_count(RelationId r) const;

    /// Throws DuplicateEdgeError when the triple is already present.
    void add_edge(const Edge& e);
    /// Throws MissingEdgeError when the triple is absent.
    void remove_edge(const Edge& e);
    /// Replaces (s, r, old_target) by (s, r, new_target).
    void substitute_target(NodeId source, RelationId relation, NodeId old_target, NodeId new_target);

    bool has_edge(NodeId source, RelationId relation, NodeId target) const;
    bool has_edge(const Edge& e) const { return has_edge(e.source, e.relation, e.target); }
    /// Bitmask of relations r with (u, r, v) present.
    std::uint64_t relation_mask(NodeId u, NodeId v) const;

    std::size_t out_degree(NodeId v, RelationId r) const;
    std::size_t in_degree(NodeId v, RelationId r) const;

    std::span<const Neighbor> out_neighbors(NodeId v) const;
    std::span<const Neighbor> in_neighbors(NodeId v) const;

    /// All edges ordered by (relation, source, target).
    std::vector<Edge> edges() const;

    /// Recomputes every index from the adjacency lists; false on any mismatch.
    bool indexes_coherent() const;

    friend bool operator==(const MultiRelGraph& a, const MultiRelGraph& b);

private:
    void check_node(NodeId v) const;
    void check_relation(RelationId r) const;
    static std::uint64_t pair_key(NodeId u, NodeId v) {
        return (static_cast<std::uint64_t>(u) << 32) | v;
    }

    std::size_t node_count_ = 0;
    RelationTable relations_;
    std::vector<std::vector<Neighbor>> out_;
    std::vector<std::vector<Neighbor>> in_;
    std::vector<std::uint32_t> out_deg_;  // node * |R| + relation
    std::vector<std::uint32_t> in_deg_;
    std::vector<std::size_t> edges_by_relation_;
    std::size_t edge_total_ = 0;
    std::unordered_map<std::uint64_t, std::uint64_t> pair_mask_;
};

// Text snapshot: header (node names, relation table with symmetric flags)
// followed by one edge record per line in canonical order, so
// write(read(x)) reproduces x byte for byte.
void write_graph(std::ostream& os, const MultiRelGraph& g, const Interner& nodes);

struct GraphSnapshot {
    MultiRelGraph graph;
    Interner nodes;
};
GraphSnapshot read_graph(std::istream& is);

}  // namespace m3gm

#endif  // M3GM_GRAPH_HPP_
