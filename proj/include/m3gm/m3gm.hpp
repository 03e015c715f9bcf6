#ifndef M3GM_M3GM_HPP_
#define M3GM_M3GM_HPP_

#include "m3gm/association.hpp"
#include "m3gm/features.hpp"
#include "m3gm/graph.hpp"
#include "m3gm/random.hpp"

#include <algorithm>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace m3gm {

/// Motif weights theta, aligned to a FeatureRegistry.
struct GraphWeights {
    Vector theta;

    GraphWeights() = default;
    explicit GraphWeights(std::size_t dimension) : theta(Vector::Zero(static_cast<Eigen::Index>(dimension))) {}
    explicit GraphWeights(Vector t) : theta(std::move(t)) {}

    std::size_t size() const { return static_cast<std::size_t>(theta.size()); }
    friend bool operator==(const GraphWeights& a, const GraphWeights& b) {
        return a.theta.size() == b.theta.size() && a.theta == b.theta;
    }
};

/// log psi+(G) = theta . f(G) + (sum of association scores over the edges).
template <typename T, typename F>
double log_score(const Eigen::MatrixBase<T>& theta, const Eigen::MatrixBase<F>& features, double assoc_sum) {
    if (theta.size() != features.size()) {
        throw DimensionError("theta has " + std::to_string(theta.size()) + " entries, feature vector has " +
                             std::to_string(features.size()));
    }
    return theta.dot(features) + assoc_sum;
}

/// Sum of association scores over every edge of `g` whose relation carries
/// association parameters.
double association_sum(const AssociationModel& m, const MultiRelGraph& g);

inline double hinge_loss(double log_score_g, double log_score_negative, double margin = 1.0) {
    return std::max(0.0, margin - log_score_g + log_score_negative);
}

struct M3GMConfig {
    double margin = 1.0;
    double lambda = 0.01;
    std::size_t negatives = 10;
    std::size_t epochs = 4;
    double learning_rate = 0.1;
    bool fine_tune = false;
    std::size_t proposal_top = 500;
    std::size_t score_block = 256;  // proposal queries scored per matrix product
    std::uint64_t seed = 1;

    void validate() const;
};

/// Negative-sampling distribution over corrupt targets for one (s, r):
/// a softmax over the association scores of the `top` highest-scoring
/// targets t with (s, r, t) absent and t != s. Everything else has zero mass.
class ProposalDistribution {
public:
    ProposalDistribution() = default;

    /// `scores(x)` is the association score of (s, r, x).
    static ProposalDistribution from_scores(const MultiRelGraph& g, NodeId s, RelationId r,
                                            const Eigen::Ref<const Vector>& scores, std::size_t top);
    static ProposalDistribution build(const MultiRelGraph& g, const AssociationModel& m, NodeId s, RelationId r,
                                      std::size_t top);

    bool empty() const { return support_.empty(); }
    std::span<const NodeId> support() const { return support_; }
    std::span<const double> probabilities() const { return probs_; }
    double probability(NodeId t) const;

    NodeId sample(Rng& rng) const;

private:
    std::vector<NodeId> support_;
    std::vector<double> probs_;
    std::vector<double> cdf_;
};

/// One draw from the proposal of (s, r). Throws TrainingError when every
/// target is already linked.
NodeId sample_negative(NodeId s, RelationId r, const MultiRelGraph& g, const AssociationModel& m, Rng& rng,
                       std::size_t top = 500);

/// A substitution negative of one positive edge.
struct SampledNegative {
    Edge removed;
    Edge added;
    FeatureDelta delta;
    double assoc_diff = 0.0;  // A(s, r, t~) - A(s, r, t)
};

/// lambda ||theta||^2 + sum of hinge losses for one training edge. When
/// `grad` is given it receives a subgradient with respect to theta.
double edge_objective(const Vector& theta, std::span<const SampledNegative> samples, double lambda, double margin,
                      Vector* grad = nullptr);

struct M3GMEpochStats {
    std::size_t epoch = 0;
    std::size_t samples = 0;
    std::size_t active = 0;  // samples with positive hinge loss
    double hinge = 0.0;
    double theta_norm_start = 0.0;
    double theta_norm_end = 0.0;
};

struct M3GMResult {
    GraphWeights weights;
    std::optional<AssociationModel> tuned_association;  // set when fine-tuning
    std::vector<M3GMEpochStats> epochs;
};

/// Margin training of theta over target substitutions of every
/// non-symmetric edge of `g`. The graph is read-only throughout; symmetric
/// edges contribute to motif counts but are never corrupted.
class M3GMTrainer {
public:
    M3GMTrainer(const MultiRelGraph& g, const AssociationModel& assoc, const FeatureRegistry& registry,
                const M3GMConfig& cfg, std::optional<GraphWeights> initial = std::nullopt);

    M3GMEpochStats run_epoch();
    /// One AdaGrad step on theta with `hinge_gradient` plus the L2 term.
    void update(const Vector& hinge_gradient);

    const GraphWeights& weights() const { return weights_; }
    const AssociationModel& association() const { return assoc_; }
    const FeatureVector& graph_features() const { return before_; }

private:
    struct Group {
        NodeId source;
        RelationId relation;
        std::vector<NodeId> targets;
    };

    void train_group(const Group& group, const ProposalDistribution& proposal, M3GMEpochStats& stats);

    const MultiRelGraph& graph_;
    const FeatureRegistry& registry_;
    M3GMConfig cfg_;
    AssociationModel assoc_;
    std::optional<AssocAdaGrad> assoc_opt_;
    FeatureVector before_;
    GraphWeights weights_;
    Vector accumulator_;
    std::vector<Group> groups_;
    Rng rng_;
    std::size_t epoch_ = 0;
};

M3GMResult train_m3gm(const MultiRelGraph& g, const AssociationModel& assoc, const FeatureRegistry& registry,
                      const M3GMConfig& cfg);

/// "template<TAB>relations<TAB>weight" per feature, after one "#" header line
/// carrying the config hash.
void write_weights(std::ostream& os, const GraphWeights& w, const FeatureRegistry& registry,
                   const RelationTable& relations, const std::string& config_hash);
struct WeightsSnapshot {
    GraphWeights weights;
    std::string config_hash;
};
WeightsSnapshot read_weights(std::istream& is, const FeatureRegistry& registry, const RelationTable& relations);

/// Feature indices ordered by decreasing |weight| (ties by index), at most n.
std::vector<std::size_t> top_weights(const GraphWeights& w, std::size_t n);

}  // namespace m3gm

#endif  // M3GM_M3GM_HPP_
