#include "m3gm/m3gm.hpp"

#include "m3gm/io_util.hpp"
#include "m3gm/optim.hpp"

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

namespace m3gm {

double association_sum(const AssociationModel& m, const MultiRelGraph& g) {
    double sum = 0.0;
    for (const auto& e : g.edges()) {
        if (m.has_parameters(e.relation)) sum += m.score(e.source, e.relation, e.target);
    }
    return sum;
}

void M3GMConfig::validate() const {
    if (!(margin > 0.0)) throw ConfigError("m3gm margin must be positive");
    if (lambda < 0.0) throw ConfigError("m3gm lambda must be non-negative");
    if (negatives == 0) throw ConfigError("m3gm needs at least one negative per edge");
    if (epochs == 0) throw ConfigError("m3gm needs at least one epoch");
    if (!(learning_rate > 0.0)) throw ConfigError("m3gm learning rate must be positive");
    if (proposal_top == 0) throw ConfigError("proposal truncation must keep at least one candidate");
    if (score_block == 0) throw ConfigError("score block size must be positive");
}

ProposalDistribution ProposalDistribution::from_scores(const MultiRelGraph& g, NodeId s, RelationId r,
                                                       const Eigen::Ref<const Vector>& scores, std::size_t top) {
    if (static_cast<std::size_t>(scores.size()) != g.node_count()) {
        throw DimensionError("proposal scores cover " + std::to_string(scores.size()) + " nodes, graph has " +
                             std::to_string(g.node_count()));
    }
    std::vector<NodeId> cand;
    cand.reserve(g.node_count());
    for (NodeId x = 0; x < g.node_count(); ++x) {
        if (x != s && !g.has_edge(s, r, x)) cand.push_back(x);
    }
    auto before = [&scores](NodeId a, NodeId b) {
        return scores(a) != scores(b) ? scores(a) > scores(b) : a < b;
    };
    const auto keep = std::min(top, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(), before);
    cand.resize(keep);

    ProposalDistribution p;
    if (cand.empty()) return p;
    const double zmax = scores(cand.front());
    double total = 0.0;
    p.probs_.reserve(keep);
    for (NodeId x : cand) {
        p.probs_.push_back(std::exp(scores(x) - zmax));
        total += p.probs_.back();
    }
    double run = 0.0;
    p.cdf_.reserve(keep);
    for (auto& w : p.probs_) {
        w /= total;
        run += w;
        p.cdf_.push_back(run);
    }
    p.cdf_.back() = 1.0;
    p.support_ = std::move(cand);
    return p;
}

ProposalDistribution ProposalDistribution::build(const MultiRelGraph& g, const AssociationModel& m, NodeId s,
                                                 RelationId r, std::size_t top) {
    const Vector scores = m.score_all(s, r, Direction::PredictTarget);
    return from_scores(g, s, r, scores, top);
}

double ProposalDistribution::probability(NodeId t) const {
    for (std::size_t i = 0; i < support_.size(); ++i) {
        if (support_[i] == t) return probs_[i];
    }
    return 0.0;
}

NodeId ProposalDistribution::sample(Rng& rng) const {
    if (support_.empty()) throw TrainingError("cannot sample from an empty proposal distribution");
    const double u = uniform_unit(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), support_.size() - 1);
    return support_[i];
}

NodeId sample_negative(NodeId s, RelationId r, const MultiRelGraph& g, const AssociationModel& m, Rng& rng,
                       std::size_t top) {
    const auto p = ProposalDistribution::build(g, m, s, r, top);
    if (p.empty()) {
        throw TrainingError("no absent target left for source " + std::to_string(s) + " under relation " +
                            g.relations().names.at(r));
    }
    return p.sample(rng);
}

double edge_objective(const Vector& theta, std::span<const SampledNegative> samples, double lambda, double margin,
                      Vector* grad) {
    double obj = lambda * theta.squaredNorm();
    if (grad) *grad = 2.0 * lambda * theta;
    for (const auto& s : samples) {
        if (s.delta.dimension != static_cast<std::size_t>(theta.size())) {
            throw DimensionError("feature delta dimension does not match theta");
        }
        const double h = hinge_loss(0.0, score_delta(theta, s.delta) + s.assoc_diff, margin);
        obj += h;
        if (grad && h > 0.0) {
            for (const auto& [i, v] : s.delta.values) (*grad)(i) += v;
        }
    }
    return obj;
}

M3GMTrainer::M3GMTrainer(const MultiRelGraph& g, const AssociationModel& assoc, const FeatureRegistry& registry,
                         const M3GMConfig& cfg, std::optional<GraphWeights> initial)
    : graph_(g),
      registry_(registry),
      cfg_(cfg),
      assoc_(assoc),
      before_(count_all(g, registry)),
      weights_(initial ? std::move(*initial) : GraphWeights(registry.size())),
      rng_(cfg.seed) {
    cfg_.validate();
    if (registry.relation_count() != g.relation_count()) {
        throw DimensionError("registry was built for a different relation inventory");
    }
    if (weights_.size() != registry.size()) throw DimensionError("initial theta does not match the registry");
    if (assoc.node_count() != g.node_count()) throw DimensionError("association model and graph disagree on |V|");
    if (cfg_.fine_tune) assoc_opt_.emplace(assoc_, cfg_.learning_rate);
    accumulator_ = Vector::Zero(weights_.theta.size());

    // Edges come sorted by (relation, source, target), so groups are runs.
    for (const auto& e : g.edges()) {
        if (g.relations().is_symmetric(e.relation) || e.is_loop()) continue;
        if (groups_.empty() || groups_.back().source != e.source || groups_.back().relation != e.relation) {
            groups_.push_back({e.source, e.relation, {}});
        }
        groups_.back().targets.push_back(e.target);
    }
    if (groups_.empty()) throw TrainingError("training graph has no non-symmetric edges to sample from");
}

void M3GMTrainer::update(const Vector& hinge_gradient) {
    const Vector grad = hinge_gradient + 2.0 * cfg_.lambda * weights_.theta;
    adagrad_update(weights_.theta, grad, accumulator_, cfg_.learning_rate);
}

void M3GMTrainer::train_group(const Group& group, const ProposalDistribution& proposal, M3GMEpochStats& stats) {
    std::vector<NodeId> targets = group.targets;
    for (std::size_t i = targets.size(); i > 1; --i) std::swap(targets[i - 1], targets[uniform_index(rng_, i)]);

    std::vector<SampledNegative> samples(cfg_.negatives);
    Vector grad;
    for (NodeId t : targets) {
        const Edge removed{group.source, group.relation, t};
        const double positive = assoc_.score(group.source, group.relation, t);
        for (auto& s : samples) {
            const NodeId corrupt = proposal.sample(rng_);
            s.removed = removed;
            s.added = {group.source, group.relation, corrupt};
            s.delta = delta_substitute(graph_, registry_, removed, s.added, before_);
            s.assoc_diff = assoc_.score(group.source, group.relation, corrupt) - positive;
        }
        const double obj = edge_objective(weights_.theta, samples, 0.0, cfg_.margin, &grad);
        stats.samples += samples.size();
        stats.hinge += obj;

        AssocGradient ag;
        for (const auto& s : samples) {
            if (hinge_loss(0.0, score_delta(weights_.theta, s.delta) + s.assoc_diff, cfg_.margin) <= 0.0) continue;
            ++stats.active;
            if (assoc_opt_) {
                assoc_.accumulate_gradient(s.added.source, s.added.relation, s.added.target, 1.0, ag);
                assoc_.accumulate_gradient(removed.source, removed.relation, removed.target, -1.0, ag);
            }
        }
        if (assoc_opt_ && (!ag.nodes.empty() || !ag.relations.empty())) {
            for (auto& [n, g] : ag.nodes) g += 2.0 * cfg_.lambda * assoc_.embeddings().row(n).transpose();
            for (auto& [r, g] : ag.relations) g += 2.0 * cfg_.lambda * assoc_.relation_parameters(r);
            assoc_opt_->step(assoc_, ag);
        }
        update(grad);
    }
}

M3GMEpochStats M3GMTrainer::run_epoch() {
    M3GMEpochStats stats;
    stats.epoch = ++epoch_;
    stats.theta_norm_start = weights_.theta.norm();
    for (std::size_t i = groups_.size(); i > 1; --i) std::swap(groups_[i - 1], groups_[uniform_index(rng_, i)]);

    // With a fine-tuned association model the proposals must see the latest
    // parameters, so they are scored one group at a time.
    const std::size_t block = cfg_.fine_tune ? 1 : cfg_.score_block;
    std::vector<NodeId> sources;
    std::vector<RelationId> relations;
    for (std::size_t start = 0; start < groups_.size(); start += block) {
        const std::size_t end = std::min(groups_.size(), start + block);
        sources.clear();
        relations.clear();
        for (std::size_t i = start; i < end; ++i) {
            sources.push_back(groups_[i].source);
            relations.push_back(groups_[i].relation);
        }
        const Matrix scores = assoc_.score_block(sources, relations, Direction::PredictTarget);
        for (std::size_t i = start; i < end; ++i) {
            const auto& group = groups_[i];
            const auto proposal = ProposalDistribution::from_scores(
                graph_, group.source, group.relation, scores.row(static_cast<Eigen::Index>(i - start)).transpose(),
                cfg_.proposal_top);
            if (proposal.empty()) {
                throw TrainingError("no absent target left for source " + std::to_string(group.source) +
                                    " under relation " + graph_.relations().names.at(group.relation));
            }
            train_group(group, proposal, stats);
        }
    }
    stats.theta_norm_end = weights_.theta.norm();
    if (!weights_.theta.allFinite()) throw TrainingError("theta diverged in epoch " + std::to_string(stats.epoch));
    return stats;
}

M3GMResult train_m3gm(const MultiRelGraph& g, const AssociationModel& assoc, const FeatureRegistry& registry,
                      const M3GMConfig& cfg) {
    M3GMTrainer trainer(g, assoc, registry, cfg);
    M3GMResult result;
    for (std::size_t e = 0; e < cfg.epochs; ++e) result.epochs.push_back(trainer.run_epoch());
    result.weights = trainer.weights();
    if (cfg.fine_tune) result.tuned_association = trainer.association();
    return result;
}

void write_weights(std::ostream& os, const GraphWeights& w, const FeatureRegistry& registry,
                   const RelationTable& relations, const std::string& config_hash) {
    if (w.size() != registry.size()) throw DimensionError("theta does not match the registry");
    os << "# m3gm-weights\tconfig=" << config_hash << '\n';
    for (std::size_t i = 0; i < registry.size(); ++i) {
        os << template_name(registry.feature(i).kind) << '\t' << registry.relation_label(i, relations) << '\t'
           << format_double(w.theta(static_cast<Eigen::Index>(i))) << '\n';
    }
}

WeightsSnapshot read_weights(std::istream& is, const FeatureRegistry& registry, const RelationTable& relations) {
    WeightsSnapshot snap;
    snap.weights = GraphWeights(registry.size());
    std::vector<bool> seen(registry.size(), false);
    std::string line;
    std::size_t line_no = 0;
    const std::string header = "# m3gm-weights\tconfig=";
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.starts_with('#')) {
            if (line.starts_with(header)) snap.config_hash = line.substr(header.size());
            continue;
        }
        const auto f = split(line, '\t');
        if (f.size() != 3) throw FormatError("weights line " + std::to_string(line_no) + ": expected 3 fields");
        const auto idx = registry.parse(f[0], f[1], relations);
        if (!idx) throw FormatError("weights line " + std::to_string(line_no) + ": unknown feature " + f[0] + " " + f[1]);
        if (seen[*idx]) throw FormatError("weights line " + std::to_string(line_no) + ": feature listed twice");
        seen[*idx] = true;
        snap.weights.theta(static_cast<Eigen::Index>(*idx)) = parse_double(f[2], line_no);
    }
    const auto missing = std::find(seen.begin(), seen.end(), false);
    if (missing != seen.end()) {
        const auto i = static_cast<std::size_t>(missing - seen.begin());
        throw FormatError(std::string("weights file lacks feature ") + template_name(registry.feature(i).kind) + " " +
                          registry.relation_label(i, relations));
    }
    return snap;
}

std::vector<std::size_t> top_weights(const GraphWeights& w, std::size_t n) {
    std::vector<std::size_t> idx(w.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&w](std::size_t a, std::size_t b) {
        return std::abs(w.theta(static_cast<Eigen::Index>(a))) > std::abs(w.theta(static_cast<Eigen::Index>(b)));
    });
    idx.resize(std::min(n, idx.size()));
    return idx;
}

}  // namespace m3gm
