#ifndef M3GM_FEATURES_HPP_
#define M3GM_FEATURES_HPP_

#include "m3gm/graph.hpp"
#include "m3gm/types.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace m3gm {

/// The 17 basis motif templates. Declaration order is registry order.
enum class Template : std::uint8_t {
    EdgeCount,
    Cycle2,
    Cycle3,
    OutExactly1,
    OutExactly2,
    OutExactly3,
    InExactly1,
    InExactly2,
    InExactly3,
    OutAtLeast1,
    OutAtLeast2,
    OutAtLeast3,
    InAtLeast1,
    InAtLeast2,
    InAtLeast3,
    Path2,
    Transitivity,
};

inline constexpr std::size_t kTemplateCount = 17;

const char* template_name(Template t);
std::optional<Template> parse_template(std::string_view name);
/// Number of relation labels a template is instantiated with.
std::size_t template_arity(Template t);

enum class DegreeSide : std::uint8_t { Out, In };
enum class DegreeRule : std::uint8_t { Exactly, AtLeast };
Template degree_template(DegreeSide side, DegreeRule rule, std::size_t k);

struct FeatureId {
    Template kind = Template::EdgeCount;
    std::array<RelationId, 3> relations{};

    std::size_t arity() const { return template_arity(kind); }
    friend bool operator==(const FeatureId&, const FeatureId&) = default;
};

/// Canonical representative of a relation tuple under the template's symmetry:
/// singleton (EdgeCount), multiset (Cycle2 and degree buckets), cyclic
/// rotation (Cycle3), ordered (Path2, Transitivity).
FeatureId canonicalize(FeatureId id);

/// The combinatory feature space over a relation inventory.
///
/// Features are ordered by template, then by canonical relation tuple. Every
/// template keeps a dense lookup table over all ordered tuples so that hot
/// paths map a relation tuple to a feature index without hashing.
///
/// A 2-cycle between u and v under the same relation counts once per
/// unordered node pair.
class FeatureRegistry {
public:
    static constexpr std::uint32_t kNone = ~std::uint32_t{0};

    explicit FeatureRegistry(std::size_t relation_count);

    std::size_t size() const { return features_.size(); }
    std::size_t relation_count() const { return relation_count_; }
    const FeatureId& feature(std::size_t index) const { return features_.at(index); }
    const std::vector<FeatureId>& features() const { return features_; }

    std::optional<std::size_t> find(const FeatureId& id) const;

    std::uint32_t edge_count(RelationId r) const { return lookup_[idx(Template::EdgeCount)][r]; }
    std::uint32_t cycle2(RelationId a, RelationId b) const {
        return lookup_[idx(Template::Cycle2)][a * relation_count_ + b];
    }
    std::uint32_t cycle3(RelationId a, RelationId b, RelationId c) const {
        return lookup_[idx(Template::Cycle3)][(a * relation_count_ + b) * relation_count_ + c];
    }
    std::uint32_t path2(RelationId a, RelationId b) const {
        return lookup_[idx(Template::Path2)][a * relation_count_ + b];
    }
    std::uint32_t transitivity(RelationId a, RelationId b, RelationId c) const {
        return lookup_[idx(Template::Transitivity)][(a * relation_count_ + b) * relation_count_ + c];
    }
    /// `sorted` holds k relations in non-decreasing order.
    std::uint32_t degree(Template t, std::span<const RelationId> sorted) const;

    bool is_transitivity(std::size_t index) const { return features_[index].kind == Template::Transitivity; }
    /// Index of the Path2 feature that is the denominator of a transitivity feature.
    std::uint32_t denominator(std::size_t index) const { return denominator_[index]; }

    /// Comma-joined relation names, e.g. "_hypernym,_has_part".
    std::string relation_label(std::size_t index, const RelationTable& relations) const;
    /// Inverse of template_name + relation_label.
    std::optional<std::size_t> parse(std::string_view templ, std::string_view relations,
                                     const RelationTable& table) const;

private:
    static std::size_t idx(Template t) { return static_cast<std::size_t>(t); }

    std::size_t relation_count_;
    std::vector<FeatureId> features_;
    std::array<std::vector<std::uint32_t>, kTemplateCount> lookup_;
    std::vector<std::uint32_t> denominator_;
};

FeatureRegistry build_registry(const RelationTable& relations);

/// Sparse change of a feature vector.
///
/// `counts` are exact integer changes of the raw counters (for transitivity
/// features the raw counter is the closed-path numerator); `values` are the
/// resulting changes of the materialized feature values.
struct FeatureDelta {
    std::size_t dimension = 0;
    std::vector<std::pair<std::uint32_t, std::int64_t>> counts;
    std::vector<std::pair<std::uint32_t, double>> values;

    bool empty() const { return counts.empty() && values.empty(); }
};

/// Motif counts of a graph aligned to a registry.
///
/// Counters are integers. Transitivity(r1, r2, r3) is materialized on read as
/// closed / Path2(r1, r2), and is 0 when no such path exists. The vector keeps
/// a pointer to its registry, which must outlive it.
class FeatureVector {
public:
    explicit FeatureVector(const FeatureRegistry& registry);

    const FeatureRegistry& registry() const { return *registry_; }
    std::size_t size() const { return counts_.size(); }
    std::int64_t count(std::size_t index) const { return counts_.at(index); }
    const std::vector<std::int64_t>& counts() const { return counts_; }
    std::vector<std::int64_t>& mutable_counts() { return counts_; }

    double value(std::size_t index) const;
    Vector values() const;

    void apply(const FeatureDelta& delta);

    friend bool operator==(const FeatureVector& a, const FeatureVector& b) { return a.counts_ == b.counts_; }

private:
    const FeatureRegistry* registry_;
    std::vector<std::int64_t> counts_;
};

/// Full motif census of `g`. Self-loops contribute to no feature.
FeatureVector count_all(const MultiRelGraph& g, const FeatureRegistry& registry);

/// Exact change of the feature vector when `removed` is replaced by `added`
/// (same source and relation). Reads only the pre-substitution graph.
FeatureDelta delta_substitute(const MultiRelGraph& g, const FeatureRegistry& registry, const Edge& removed,
                              const Edge& added, const FeatureVector& before);

/// Exact change when `added` is inserted into `g`.
FeatureDelta delta_insert(const MultiRelGraph& g, const FeatureRegistry& registry, const Edge& added,
                          const FeatureVector& before);

/// theta^T f(G~) - theta^T f(G) over the changed coordinates.
double score_delta(const Vector& theta, const FeatureDelta& delta);

}  // namespace m3gm

#endif  // M3GM_FEATURES_HPP_
