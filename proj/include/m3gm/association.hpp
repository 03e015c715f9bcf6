#ifndef M3GM_ASSOCIATION_HPP_
#define M3GM_ASSOCIATION_HPP_

#include "m3gm/embeddings.hpp"
#include "m3gm/filter.hpp"
#include "m3gm/graph.hpp"
#include "m3gm/random.hpp"
#include "m3gm/types.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace m3gm {

enum class AssocVariant : std::uint8_t { TransE, BiLin, DistMult };

const char* to_string(AssocVariant v);
AssocVariant parse_variant(std::string_view name);

// Association operators on Eigen expressions.

/// -||e_s + e_r - e_t||
template <typename S, typename R, typename T>
typename S::Scalar transe_score(const Eigen::MatrixBase<S>& es, const Eigen::MatrixBase<R>& er,
                                const Eigen::MatrixBase<T>& et) {
    return -(es + er - et).norm();
}

/// e_s^T W_r e_t
template <typename S, typename W, typename T>
typename S::Scalar bilin_score(const Eigen::MatrixBase<S>& es, const Eigen::MatrixBase<W>& wr,
                               const Eigen::MatrixBase<T>& et) {
    return es.dot(wr * et);
}

/// sum_i e_s[i] e_r[i] e_t[i]
template <typename S, typename R, typename T>
typename S::Scalar distmult_score(const Eigen::MatrixBase<S>& es, const Eigen::MatrixBase<R>& er,
                                  const Eigen::MatrixBase<T>& et) {
    return es.cwiseProduct(er).dot(et);
}

/// Sparse gradient of a loss with respect to model parameters.
struct AssocGradient {
    std::vector<std::pair<NodeId, Vector>> nodes;
    std::vector<std::pair<RelationId, Matrix>> relations;

    Vector& node(NodeId id, Eigen::Index dim);
    Matrix& relation(RelationId id, Eigen::Index rows, Eigen::Index cols);
};

/// Local edge scorer: shared node embeddings plus per-relation parameters
/// (a 1 x d row for TransE and DistMult, a d x d matrix for BiLin).
class AssociationModel {
public:
    AssociationModel() = default;
    /// Relations in `parameterized` get freshly initialized parameters.
    AssociationModel(AssocVariant variant, Matrix embeddings, RelationTable relations,
                     const std::vector<bool>& parameterized, std::uint64_t seed);

    AssocVariant variant() const { return variant_; }
    std::size_t dim() const { return static_cast<std::size_t>(embeddings_.cols()); }
    std::size_t node_count() const { return static_cast<std::size_t>(embeddings_.rows()); }
    const RelationTable& relations() const { return relations_; }
    bool has_parameters(RelationId r) const { return r < has_params_.size() && has_params_[r]; }

    const Matrix& embeddings() const { return embeddings_; }
    Matrix& embeddings() { return embeddings_; }
    const Matrix& relation_parameters(RelationId r) const;
    Matrix& relation_parameters(RelationId r);

    double score(NodeId s, RelationId r, NodeId t) const;
    /// Scores of (known, r, x) for every node x, or of (x, r, known) for
    /// source prediction.
    Vector score_all(NodeId known, RelationId r, Direction direction) const;
    /// Row i holds score_all(known[i], relations[i], direction), computed as
    /// one matrix product for the whole block.
    Matrix score_block(std::span<const NodeId> known, std::span<const RelationId> relations,
                       Direction direction) const;

    /// Adds coeff * d score(s, r, t) / d params to `grad`.
    void accumulate_gradient(NodeId s, RelationId r, NodeId t, double coeff, AssocGradient& grad) const;

    friend bool operator==(const AssociationModel& a, const AssociationModel& b);

private:
    void check(NodeId s, RelationId r, NodeId t) const;

    AssocVariant variant_ = AssocVariant::TransE;
    Matrix embeddings_;
    RelationTable relations_;
    std::vector<bool> has_params_;
    std::vector<Matrix> relation_params_;
};

/// Per-coordinate AdaGrad state over all parameters of one model.
class AssocAdaGrad {
public:
    AssocAdaGrad(const AssociationModel& model, double learning_rate, double epsilon = 1e-8);
    void step(AssociationModel& model, const AssocGradient& grad);

private:
    double lr_;
    double eps_;
    Matrix node_acc_;
    std::vector<Matrix> rel_acc_;
};

/// One NLL instance: softmax over the positive and its corruptions.
struct NllInstance {
    Edge positive;
    Direction corrupted = Direction::PredictTarget;  // which side the negatives replace
    std::vector<NodeId> negatives;
};

double nll_loss(const AssociationModel& m, std::span<const NllInstance> batch, AssocGradient* grad = nullptr);

/// Largest relative error between analytic and central-difference gradients
/// (step 1e-4) over every parameter the batch touches.
double gradient_check(const AssociationModel& m, std::span<const NllInstance> batch, double step = 1e-4);

struct Candidate {
    NodeId node;
    double score;
};

/// All unfiltered candidates by descending score (ties by node id), at most k.
std::vector<Candidate> rank_candidates(const AssociationModel& m, NodeId known, RelationId r, Direction direction,
                                       const FilterSet& filter, NodeId gold, std::size_t k);

/// Same as rank_candidates over a precomputed score vector.
std::vector<Candidate> top_candidates(const Vector& scores, NodeId known, RelationId r, Direction direction,
                                      const FilterSet& filter, NodeId gold, std::size_t k);

/// Position of `gold` among the unfiltered candidates of one score vector,
/// under the same ordering as rank_candidates.
std::size_t filtered_rank(const Vector& scores, NodeId known, RelationId r, Direction direction,
                          const FilterSet& filter, NodeId gold);

struct AssocTrainConfig {
    AssocVariant variant = AssocVariant::TransE;
    std::size_t negatives = 10;
    double learning_rate = 0.01;
    std::size_t symmetric_every = 5;  // 0 disables symmetric-relation instances
    std::size_t patience = 5;
    std::size_t max_epochs = 100;
    std::uint64_t seed = 1;
};

struct AssocEpochLog {
    std::size_t epoch;
    double loss;
    double dev_mrr;
    bool included_symmetric;
};

struct AssocTrainResult {
    AssociationModel model;
    std::size_t best_epoch = 0;
    double best_dev_mrr = 0.0;
    std::vector<AssocEpochLog> log;
};

/// Filtered MRR (x100) of the association model over both directions of
/// every non-symmetric edge in `eval`.
double association_mrr(const AssociationModel& m, std::span<const Edge> eval, const FilterSet& filter);

/// NLL training with uniform negatives, AdaGrad, early stopping on dev MRR.
AssocTrainResult train_association(const MultiRelGraph& train, const SynsetEmbeddings& embeddings,
                                   const AssocTrainConfig& cfg, std::span<const Edge> dev, const FilterSet& filter);

void write_association(std::ostream& os, const AssociationModel& m, const Interner& nodes,
                       const std::string& config_hash);
struct AssociationSnapshot {
    AssociationModel model;
    std::vector<std::string> node_names;
    std::string config_hash;
};
AssociationSnapshot read_association(std::istream& is);

}  // namespace m3gm

#endif  // M3GM_ASSOCIATION_HPP_
