#ifndef M3GM_FILTER_HPP_
#define M3GM_FILTER_HPP_

#include "m3gm/graph.hpp"

namespace m3gm {

/// Known completions for filtered ranking: a triple store over every split.
/// A candidate is filtered when it is the query entity itself, or when it
/// forms a known triple and is not the gold answer of the current instance.
class FilterSet {
public:
    FilterSet() = default;
    FilterSet(std::size_t node_count, const RelationTable& relations) : known_(node_count, relations) {}

    void add(const Edge& e) {
        if (!known_.has_edge(e)) known_.add_edge(e);
    }
    void add_all(const MultiRelGraph& g) {
        for (const auto& e : g.edges()) add(e);
    }

    bool is_known(const Edge& e) const { return known_.has_edge(e); }

    bool filtered(NodeId query, RelationId relation, Direction direction, NodeId candidate, NodeId gold) const {
        if (candidate == query) return true;
        if (candidate == gold) return false;
        return direction == Direction::PredictTarget ? is_known({query, relation, candidate})
                                                     : is_known({candidate, relation, query});
    }

    /// Number of unfiltered candidates for one instance, the gold included.
    std::size_t pool_size(NodeId query, RelationId relation, Direction direction, NodeId gold) const {
        const bool target = direction == Direction::PredictTarget;
        std::size_t known = target ? known_.out_degree(query, relation) : known_.in_degree(query, relation);
        if (known_.has_edge(query, relation, query)) --known;
        if (gold != query && (target ? is_known({query, relation, gold}) : is_known({gold, relation, query}))) --known;
        return known_.node_count() - 1 - known;
    }

    const MultiRelGraph& triples() const { return known_; }

private:
    MultiRelGraph known_;
};

}  // namespace m3gm

#endif  // M3GM_FILTER_HPP_
