#ifndef M3GM_EVAL_HPP_
#define M3GM_EVAL_HPP_

#include "m3gm/association.hpp"
#include "m3gm/filter.hpp"
#include "m3gm/rerank.hpp"

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace m3gm {

/// How the rule baseline ranks the gold entity when it does not fire.
enum class Fallback : std::uint8_t {
    Shuffle,       // uniform position in a seeded per-instance shuffle of the pool
    ExpectedRank,  // (pool + 1) / 2
};

const char* to_string(Fallback f);
Fallback parse_fallback(std::string_view name);

/// True when the reciprocal of the instance's gold edge is in `train`.
bool rule_fires(const MultiRelGraph& train, const Instance& inst);

/// Rank the rule baseline gives the gold entity: 1 when it fires, the
/// fallback rank over the unfiltered pool otherwise.
double rule_rank(const MultiRelGraph& train, const Instance& inst, const FilterSet& filter, Fallback fallback,
                 std::uint64_t instance_seed);

struct Metrics {
    std::size_t count = 0;
    double mr = 0.0;
    double mrr = 0.0;  // x100
    double h10 = 0.0;  // x100
    double h1 = 0.0;   // x100

    friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Aggregates ranks into MR, MRR and hits@k.
Metrics summarize(std::span<const double> ranks);

struct EvalReport {
    Metrics overall;
    std::map<std::string, Metrics> per_relation;
    std::vector<double> ranks;  // one per instance, in input order
    std::size_t rule_instances = 0;
    std::size_t rule_fired = 0;
    std::size_t rerank_skipped = 0;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// The system under evaluation. Without an association model every
/// non-symmetric instance is ranked by the rule fallback; with a rerank
/// context and alpha table the association top-K is reranked.
struct EvalSystem {
    const AssociationModel* assoc = nullptr;
    const RerankContext* rerank = nullptr;
    const AlphaTable* alpha = nullptr;
    std::size_t k = 100;
};

struct EvalOptions {
    Fallback fallback = Fallback::Shuffle;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
};

/// Filtered ranking of every instance. Symmetric relations always go to the
/// rule baseline over `train`.
EvalReport evaluate(const EvalSystem& system, std::span<const Instance> instances, const MultiRelGraph& train,
                    const FilterSet& filter, const RelationTable& relations, const EvalOptions& options);

/// Aligned table followed by "metric<TAB>value" lines.
void write_report(std::ostream& os, const EvalReport& report, bool per_relation);

}  // namespace m3gm

#endif  // M3GM_EVAL_HPP_
