#ifndef M3GM_RERANK_HPP_
#define M3GM_RERANK_HPP_

#include "m3gm/association.hpp"
#include "m3gm/features.hpp"
#include "m3gm/m3gm.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace m3gm {

/// One prediction instance: an edge with one side hidden.
struct Instance {
    Edge edge;
    Direction direction = Direction::PredictTarget;

    NodeId query() const { return direction == Direction::PredictTarget ? edge.source : edge.target; }
    NodeId gold() const { return direction == Direction::PredictTarget ? edge.target : edge.source; }
    /// The edge obtained by completing the instance with `candidate`.
    Edge completed(NodeId candidate) const {
        return direction == Direction::PredictTarget ? Edge{edge.source, edge.relation, candidate}
                                                     : Edge{candidate, edge.relation, edge.target};
    }
};

/// Two instances per edge, target side first.
std::vector<Instance> make_instances(std::span<const Edge> edges);

/// Per-relation interpolation weight between graph and association scores.
/// Symmetric relations keep 0 since they are answered by the rule baseline.
struct AlphaTable {
    std::vector<double> alpha;
    std::vector<std::string> warnings;

    AlphaTable() = default;
    explicit AlphaTable(std::size_t relation_count) : alpha(relation_count, 0.0) {}
    double operator[](RelationId r) const { return alpha.at(r); }
};

/// "relation<TAB>alpha" per line.
void write_alpha(std::ostream& os, const AlphaTable& table, const RelationTable& relations);
AlphaTable read_alpha(std::istream& is, const RelationTable& relations);

/// The frozen state a candidate edge is hypothetically inserted into.
struct RerankContext {
    const MultiRelGraph* graph = nullptr;
    const FeatureRegistry* registry = nullptr;
    const FeatureVector* features = nullptr;  // count_all(*graph, *registry)
    const Vector* theta = nullptr;
};

/// theta . (f(G + e) - f(G)); 0 for edges already in the graph.
double graph_delta_score(const RerankContext& ctx, const Edge& e);

struct RerankedCandidate {
    NodeId node;
    double assoc;
    double graph;
    double combined;
};

struct RerankResult {
    std::vector<RerankedCandidate> ranked;
    std::size_t skipped = 0;  // candidates whose edge was already present
};

inline double combine_scores(double alpha, double graph, double assoc) {
    return alpha * graph + (1.0 - alpha) * assoc;
}

/// Reorders an association top-K list by alpha * graph + (1 - alpha) * assoc.
/// Ties keep their input order.
RerankResult rerank(std::span<const Candidate> candidates, const Instance& inst, const RerankContext& ctx,
                    double alpha);

/// Per-relation grid search over alpha in {0.00, 0.01, ..., 1.00} for the
/// dev MRR of the reranked system; the smallest maximizer wins.
AlphaTable tune_alpha(std::span<const Instance> dev, const AssociationModel& assoc, const FilterSet& filter,
                      const RerankContext& ctx, std::size_t k, std::size_t threads = 1);

}  // namespace m3gm

#endif  // M3GM_RERANK_HPP_
