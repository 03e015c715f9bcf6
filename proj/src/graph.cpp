#include "m3gm/graph.hpp"

#include <algorithm>
#include <bit>
#include <tuple>
#include <string>

namespace m3gm {

NodeId Interner::intern(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it != index_.end()) return it->second;
    const auto id = static_cast<NodeId>(names_.size());
    names_.emplace_back(name);
    index_.emplace(names_.back(), id);
    return id;
}

std::optional<NodeId> Interner::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

RelationId RelationTable::add(std::string_view name, bool is_symmetric) {
    if (auto existing = find(name)) return *existing;
    if (names.size() >= kMaxRelations) {
        throw GraphError("relation table is limited to " + std::to_string(kMaxRelations) + " relations");
    }
    names.emplace_back(name);
    symmetric.push_back(is_symmetric);
    return static_cast<RelationId>(names.size() - 1);
}

std::optional<RelationId> RelationTable::find(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<RelationId>(i);
    }
    return std::nullopt;
}

MultiRelGraph::MultiRelGraph(std::size_t node_count, RelationTable relations)
    : node_count_(node_count),
      relations_(std::move(relations)),
      out_(node_count),
      in_(node_count),
      out_deg_(node_count * relations_.size(), 0),
      in_deg_(node_count * relations_.size(), 0),
      edges_by_relation_(relations_.size(), 0) {
    if (relations_.size() > kMaxRelations) {
        throw GraphError("too many relations");
    }
}

void MultiRelGraph::check_node(NodeId v) const {
    if (v >= node_count_) {
        throw InvalidIdError("node id " + std::to_string(v) + " out of range (|V| = " +
                             std::to_string(node_count_) + ")");
    }
}

void MultiRelGraph::check_relation(RelationId r) const {
    if (r >= relations_.size()) {
        throw InvalidIdError("relation id " + std::to_string(r) + " out of range");
    }
}

std::size_t MultiRelGraph::edge_count(RelationId r) const {
    check_relation(r);
    return edges_by_relation_[r];
}

namespace {

void sorted_insert(std::vector<Neighbor>& list, Neighbor n) {
    list.insert(std::lower_bound(list.begin(), list.end(), n), n);
}

void sorted_erase(std::vector<Neighbor>& list, Neighbor n) {
    auto it = std::lower_bound(list.begin(), list.end(), n);
    list.erase(it);
}

std::string describe(const Edge& e) {
    return "(" + std::to_string(e.source) + ", " + std::to_string(e.relation) + ", " +
           std::to_string(e.target) + ")";
}

}  // namespace

void MultiRelGraph::add_edge(const Edge& e) {
    check_node(e.source);
    check_node(e.target);
    check_relation(e.relation);
    auto& mask = pair_mask_[pair_key(e.source, e.target)];
    const std::uint64_t bit = std::uint64_t{1} << e.relation;
    if (mask & bit) throw DuplicateEdgeError("duplicate edge " + describe(e));
    mask |= bit;
    sorted_insert(out_[e.source], {e.target, e.relation});
    sorted_insert(in_[e.target], {e.source, e.relation});
    ++out_deg_[e.source * relations_.size() + e.relation];
    ++in_deg_[e.target * relations_.size() + e.relation];
    ++edges_by_relation_[e.relation];
    ++edge_total_;
}

void MultiRelGraph::remove_edge(const Edge& e) {
    check_node(e.source);
    check_node(e.target);
    check_relation(e.relation);
    auto it = pair_mask_.find(pair_key(e.source, e.target));
    const std::uint64_t bit = std::uint64_t{1} << e.relation;
    if (it == pair_mask_.end() || !(it->second & bit)) {
        throw MissingEdgeError("missing edge " + describe(e));
    }
    it->second &= ~bit;
    if (it->second == 0) pair_mask_.erase(it);
    sorted_erase(out_[e.source], {e.target, e.relation});
    sorted_erase(in_[e.target], {e.source, e.relation});
    --out_deg_[e.source * relations_.size() + e.relation];
    --in_deg_[e.target * relations_.size() + e.relation];
    --edges_by_relation_[e.relation];
    --edge_total_;
}

void MultiRelGraph::substitute_target(NodeId source, RelationId relation, NodeId old_target,
                                      NodeId new_target) {
    const Edge removed{source, relation, old_target};
    const Edge added{source, relation, new_target};
    if (!has_edge(removed)) throw MissingEdgeError("substitution source edge missing " + describe(removed));
    if (has_edge(added)) throw DuplicateEdgeError("substitution target edge exists " + describe(added));
    remove_edge(removed);
    add_edge(added);
}

bool MultiRelGraph::has_edge(NodeId source, RelationId relation, NodeId target) const {
    check_node(source);
    check_node(target);
    check_relation(relation);
    return (relation_mask(source, target) >> relation) & 1U;
}

std::uint64_t MultiRelGraph::relation_mask(NodeId u, NodeId v) const {
    auto it = pair_mask_.find(pair_key(u, v));
    return it == pair_mask_.end() ? 0 : it->second;
}

std::size_t MultiRelGraph::out_degree(NodeId v, RelationId r) const {
    check_node(v);
    check_relation(r);
    return out_deg_[v * relations_.size() + r];
}

std::size_t MultiRelGraph::in_degree(NodeId v, RelationId r) const {
    check_node(v);
    check_relation(r);
    return in_deg_[v * relations_.size() + r];
}

std::span<const Neighbor> MultiRelGraph::out_neighbors(NodeId v) const {
    check_node(v);
    return out_[v];
}

std::span<const Neighbor> MultiRelGraph::in_neighbors(NodeId v) const {
    check_node(v);
    return in_[v];
}

std::vector<Edge> MultiRelGraph::edges() const {
    std::vector<Edge> result;
    result.reserve(edge_total_);
    for (NodeId s = 0; s < node_count_; ++s) {
        for (const auto& n : out_[s]) result.push_back({s, n.relation, n.node});
    }
    std::sort(result.begin(), result.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.relation, a.source, a.target) < std::tie(b.relation, b.source, b.target);
    });
    return result;
}

bool MultiRelGraph::indexes_coherent() const {
    const std::size_t nr = relations_.size();
    std::vector<std::uint32_t> out_deg(node_count_ * nr, 0), in_deg(node_count_ * nr, 0);
    std::vector<std::size_t> by_rel(nr, 0);
    std::unordered_map<std::uint64_t, std::uint64_t> masks;
    std::size_t total = 0;
    for (NodeId s = 0; s < node_count_; ++s) {
        if (!std::is_sorted(out_[s].begin(), out_[s].end())) return false;
        if (!std::is_sorted(in_[s].begin(), in_[s].end())) return false;
        for (const auto& n : out_[s]) {
            ++out_deg[s * nr + n.relation];
            ++in_deg[n.node * nr + n.relation];
            ++by_rel[n.relation];
            masks[pair_key(s, n.node)] |= std::uint64_t{1} << n.relation;
            ++total;
        }
    }
    std::size_t in_total = 0;
    for (NodeId t = 0; t < node_count_; ++t) {
        for (const auto& n : in_[t]) {
            if (!((masks[pair_key(n.node, t)] >> n.relation) & 1U)) return false;
            ++in_total;
        }
    }
    return total == edge_total_ && in_total == edge_total_ && out_deg == out_deg_ && in_deg == in_deg_ &&
           by_rel == edges_by_relation_ && masks == pair_mask_;
}

bool operator==(const MultiRelGraph& a, const MultiRelGraph& b) {
    return a.node_count_ == b.node_count_ && a.relations_ == b.relations_ && a.out_ == b.out_ &&
           a.in_ == b.in_ && a.out_deg_ == b.out_deg_ && a.in_deg_ == b.in_deg_ &&
           a.edges_by_relation_ == b.edges_by_relation_ && a.edge_total_ == b.edge_total_ &&
           a.pair_mask_ == b.pair_mask_;
}

}  // namespace m3gm
