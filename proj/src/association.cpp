#include "m3gm/association.hpp"

#include "m3gm/io_util.hpp"
#include "m3gm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace m3gm {

const char* to_string(AssocVariant v) {
    switch (v) {
        case AssocVariant::TransE: return "transe";
        case AssocVariant::BiLin: return "bilin";
        case AssocVariant::DistMult: return "distmult";
    }
    return "?";
}

AssocVariant parse_variant(std::string_view name) {
    const auto lower = lowercase(name);
    if (lower == "transe") return AssocVariant::TransE;
    if (lower == "bilin") return AssocVariant::BiLin;
    if (lower == "distmult") return AssocVariant::DistMult;
    throw ConfigError("unknown association model '" + std::string(name) + "' (expected transe, bilin or distmult)");
}

Vector& AssocGradient::node(NodeId id, Eigen::Index dim) {
    for (auto& [n, g] : nodes) {
        if (n == id) return g;
    }
    nodes.emplace_back(id, Vector::Zero(dim));
    return nodes.back().second;
}

Matrix& AssocGradient::relation(RelationId id, Eigen::Index rows, Eigen::Index cols) {
    for (auto& [r, g] : relations) {
        if (r == id) return g;
    }
    relations.emplace_back(id, Matrix::Zero(rows, cols));
    return relations.back().second;
}

AssociationModel::AssociationModel(AssocVariant variant, Matrix embeddings, RelationTable relations,
                                   const std::vector<bool>& parameterized, std::uint64_t seed)
    : variant_(variant), embeddings_(std::move(embeddings)), relations_(std::move(relations)) {
    if (parameterized.size() != relations_.size()) {
        throw DimensionError("parameter mask covers " + std::to_string(parameterized.size()) + " relations, table has " +
                             std::to_string(relations_.size()));
    }
    const auto d = embeddings_.cols();
    const double half = 0.5 / static_cast<double>(std::max<Eigen::Index>(d, 1));
    Rng rng(seed);
    auto noise = [&] { return (2.0 * uniform_unit(rng) - 1.0) * half; };
    has_params_ = parameterized;
    relation_params_.resize(relations_.size());
    for (std::size_t r = 0; r < relations_.size(); ++r) {
        if (!has_params_[r]) continue;
        auto& p = relation_params_[r];
        if (variant_ == AssocVariant::BiLin) {
            p = Matrix::Identity(d, d);
            for (Eigen::Index i = 0; i < d; ++i)
                for (Eigen::Index j = 0; j < d; ++j) p(i, j) += noise();
        } else {
            p.resize(1, d);
            for (Eigen::Index j = 0; j < d; ++j) p(0, j) = noise();
        }
    }
}

const Matrix& AssociationModel::relation_parameters(RelationId r) const {
    if (!has_parameters(r)) throw InvalidIdError("relation " + std::to_string(r) + " has no association parameters");
    return relation_params_[r];
}

Matrix& AssociationModel::relation_parameters(RelationId r) {
    if (!has_parameters(r)) throw InvalidIdError("relation " + std::to_string(r) + " has no association parameters");
    return relation_params_[r];
}

void AssociationModel::check(NodeId s, RelationId r, NodeId t) const {
    if (s >= node_count() || t >= node_count()) {
        throw InvalidIdError("node id out of range: " + std::to_string(std::max(s, t)));
    }
    if (!has_parameters(r)) {
        throw InvalidIdError("relation " + std::to_string(r) + " has no association parameters");
    }
}

double AssociationModel::score(NodeId s, RelationId r, NodeId t) const {
    check(s, r, t);
    const auto es = embeddings_.row(s);
    const auto et = embeddings_.row(t);
    const auto& p = relation_params_[r];
    switch (variant_) {
        case AssocVariant::TransE: return transe_score(es, p.row(0), et);
        case AssocVariant::BiLin: return bilin_score(es.transpose(), p, et.transpose());
        case AssocVariant::DistMult: return distmult_score(es, p.row(0), et);
    }
    return 0.0;
}

Vector AssociationModel::score_all(NodeId known, RelationId r, Direction direction) const {
    check(known, r, known);
    const auto& p = relation_params_[r];
    const auto e = embeddings_.row(known);
    const bool target = direction == Direction::PredictTarget;
    switch (variant_) {
        case AssocVariant::TransE: {
            const Eigen::RowVectorXd anchor = target ? Eigen::RowVectorXd(e + p.row(0)) : Eigen::RowVectorXd(e - p.row(0));
            return -(embeddings_.rowwise() - anchor).rowwise().norm();
        }
        case AssocVariant::BiLin:
            return target ? Vector(embeddings_ * (e * p).transpose()) : Vector(embeddings_ * (p * e.transpose()));
        case AssocVariant::DistMult:
            return embeddings_ * e.cwiseProduct(p.row(0)).transpose();
    }
    return {};
}

Matrix AssociationModel::score_block(std::span<const NodeId> known, std::span<const RelationId> relations,
                                     Direction direction) const {
    if (known.size() != relations.size()) throw DimensionError("score_block: query and relation lists differ in length");
    const bool target = direction == Direction::PredictTarget;
    Matrix queries(static_cast<Eigen::Index>(known.size()), embeddings_.cols());
    for (std::size_t i = 0; i < known.size(); ++i) {
        check(known[i], relations[i], known[i]);
        const auto& p = relation_params_[relations[i]];
        const auto e = embeddings_.row(known[i]);
        auto q = queries.row(static_cast<Eigen::Index>(i));
        switch (variant_) {
            case AssocVariant::TransE: q = target ? Eigen::RowVectorXd(e + p.row(0)) : Eigen::RowVectorXd(e - p.row(0)); break;
            case AssocVariant::BiLin: q = target ? Eigen::RowVectorXd(e * p) : Eigen::RowVectorXd((p * e.transpose()).transpose()); break;
            case AssocVariant::DistMult: q = e.cwiseProduct(p.row(0)); break;
        }
    }
    Matrix scores = queries * embeddings_.transpose();
    if (variant_ == AssocVariant::TransE) {
        // ||x - q||^2 = ||x||^2 + ||q||^2 - 2 q.x
        Matrix sq = -2.0 * scores;
        sq.rowwise() += embeddings_.rowwise().squaredNorm().transpose();
        sq.colwise() += queries.rowwise().squaredNorm();
        scores = -sq.cwiseMax(0.0).cwiseSqrt();
    }
    return scores;
}

void AssociationModel::accumulate_gradient(NodeId s, RelationId r, NodeId t, double coeff,
                                           AssocGradient& grad) const {
    check(s, r, t);
    const auto d = embeddings_.cols();
    const auto es = embeddings_.row(s).transpose();
    const auto et = embeddings_.row(t).transpose();
    const auto& p = relation_params_[r];
    switch (variant_) {
        case AssocVariant::TransE: {
            const Vector x = es + p.row(0).transpose() - et;
            const double norm = x.norm();
            if (norm == 0.0) return;
            const Vector g = (-coeff / norm) * x;
            grad.node(s, d) += g;
            grad.node(t, d) -= g;
            grad.relation(r, 1, d) += g.transpose();
            break;
        }
        case AssocVariant::BiLin: {
            const Vector gs = coeff * (p * et);
            const Vector gt = coeff * (p.transpose() * es);
            grad.node(s, d) += gs;
            grad.node(t, d) += gt;
            grad.relation(r, d, d) += coeff * es * et.transpose();
            break;
        }
        case AssocVariant::DistMult: {
            const auto er = p.row(0).transpose();
            const Vector gs = coeff * er.cwiseProduct(et);
            const Vector gt = coeff * er.cwiseProduct(es);
            grad.node(s, d) += gs;
            grad.node(t, d) += gt;
            grad.relation(r, 1, d) += coeff * es.cwiseProduct(et).transpose();
            break;
        }
    }
}

bool operator==(const AssociationModel& a, const AssociationModel& b) {
    return a.variant_ == b.variant_ && a.relations_ == b.relations_ && a.has_params_ == b.has_params_ &&
           a.embeddings_.rows() == b.embeddings_.rows() && a.embeddings_.cols() == b.embeddings_.cols() &&
           a.embeddings_ == b.embeddings_ &&
           std::equal(a.relation_params_.begin(), a.relation_params_.end(), b.relation_params_.begin(),
                      b.relation_params_.end(), [](const Matrix& x, const Matrix& y) {
                          return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
                      });
}

AssocAdaGrad::AssocAdaGrad(const AssociationModel& model, double learning_rate, double epsilon)
    : lr_(learning_rate), eps_(epsilon) {
    node_acc_ = Matrix::Zero(model.embeddings().rows(), model.embeddings().cols());
    rel_acc_.resize(model.relations().size());
    for (std::size_t r = 0; r < rel_acc_.size(); ++r) {
        const auto id = static_cast<RelationId>(r);
        if (model.has_parameters(id)) {
            const auto& p = model.relation_parameters(id);
            rel_acc_[r] = Matrix::Zero(p.rows(), p.cols());
        }
    }
}

void AssocAdaGrad::step(AssociationModel& model, const AssocGradient& grad) {
    for (const auto& [n, g] : grad.nodes) {
        adagrad_update(model.embeddings().row(n), g.transpose(), node_acc_.row(n), lr_, eps_);
    }
    for (const auto& [r, g] : grad.relations) {
        adagrad_update(model.relation_parameters(r), g, rel_acc_[r], lr_, eps_);
    }
}

double nll_loss(const AssociationModel& m, std::span<const NllInstance> batch, AssocGradient* grad) {
    double total = 0.0;
    std::vector<double> z;
    for (const auto& inst : batch) {
        const auto& e = inst.positive;
        const bool target = inst.corrupted == Direction::PredictTarget;
        auto triple = [&](std::size_t j) {
            if (j == 0) return e;
            const NodeId x = inst.negatives[j - 1];
            return target ? Edge{e.source, e.relation, x} : Edge{x, e.relation, e.target};
        };
        const std::size_t n = inst.negatives.size() + 1;
        z.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            const auto t = triple(j);
            z[j] = m.score(t.source, t.relation, t.target);
        }
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - zmax);
        const double lse = zmax + std::log(sum);
        total += lse - z[0];
        if (grad) {
            for (std::size_t j = 0; j < n; ++j) {
                const double p = std::exp(z[j] - lse);
                const auto t = triple(j);
                m.accumulate_gradient(t.source, t.relation, t.target, p - (j == 0 ? 1.0 : 0.0), *grad);
            }
        }
    }
    return total;
}

double gradient_check(const AssociationModel& m, std::span<const NllInstance> batch, double step) {
    AssocGradient analytic;
    nll_loss(m, batch, &analytic);
    AssociationModel probe = m;
    double worst = 0.0;
    auto compare = [&](double& coord, double a) {
        const double saved = coord;
        coord = saved + step;
        const double up = nll_loss(probe, batch);
        coord = saved - step;
        const double down = nll_loss(probe, batch);
        coord = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double scale = std::max({std::abs(a), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(a - numeric) / scale);
    };
    for (const auto& [n, g] : analytic.nodes) {
        for (Eigen::Index j = 0; j < g.size(); ++j) compare(probe.embeddings()(n, j), g(j));
    }
    for (const auto& [r, g] : analytic.relations) {
        auto& p = probe.relation_parameters(r);
        for (Eigen::Index i = 0; i < g.rows(); ++i)
            for (Eigen::Index j = 0; j < g.cols(); ++j) compare(p(i, j), g(i, j));
    }
    return worst;
}

namespace {

bool ranks_before(const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.node < b.node;
}

}  // namespace

std::vector<Candidate> rank_candidates(const AssociationModel& m, NodeId known, RelationId r, Direction direction,
                                       const FilterSet& filter, NodeId gold, std::size_t k) {
    return top_candidates(m.score_all(known, r, direction), known, r, direction, filter, gold, k);
}

std::vector<Candidate> top_candidates(const Vector& scores, NodeId known, RelationId r, Direction direction,
                                      const FilterSet& filter, NodeId gold, std::size_t k) {
    std::vector<Candidate> out;
    out.reserve(static_cast<std::size_t>(scores.size()));
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
        const auto c = static_cast<NodeId>(i);
        if (!filter.filtered(known, r, direction, c, gold)) out.push_back({c, scores(i)});
    }
    const auto keep = std::min(k, out.size());
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(), ranks_before);
    out.resize(keep);
    return out;
}

std::size_t filtered_rank(const Vector& scores, NodeId known, RelationId r, Direction direction,
                          const FilterSet& filter, NodeId gold) {
    const Candidate g{gold, scores(gold)};
    std::size_t rank = 1;
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
        const auto c = static_cast<NodeId>(i);
        if (c == gold || filter.filtered(known, r, direction, c, gold)) continue;
        if (ranks_before({c, scores(i)}, g)) ++rank;
    }
    return rank;
}

double association_mrr(const AssociationModel& m, std::span<const Edge> eval, const FilterSet& filter) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& e : eval) {
        if (m.relations().is_symmetric(e.relation) || !m.has_parameters(e.relation)) continue;
        for (auto dir : {Direction::PredictTarget, Direction::PredictSource}) {
            const bool target = dir == Direction::PredictTarget;
            const NodeId known = target ? e.source : e.target;
            const NodeId gold = target ? e.target : e.source;
            const Vector scores = m.score_all(known, e.relation, dir);
            sum += 1.0 / static_cast<double>(filtered_rank(scores, known, e.relation, dir, filter, gold));
            ++count;
        }
    }
    return count ? 100.0 * sum / static_cast<double>(count) : 0.0;
}

namespace {

// Corruptions x of one side of `e` such that the corrupted triple is absent
// from `g` and is not a self-loop; drawn uniformly with replacement.
bool sample_corruptions(const MultiRelGraph& g, const Edge& e, Direction side, std::size_t count, Rng& rng,
                        std::vector<NodeId>& out) {
    const bool target = side == Direction::PredictTarget;
    const NodeId anchor = target ? e.source : e.target;
    const std::size_t linked = target ? g.out_degree(anchor, e.relation) : g.in_degree(anchor, e.relation);
    const std::size_t loop = g.has_edge(anchor, e.relation, anchor) ? 1 : 0;
    const std::size_t valid = g.node_count() - 1 - (linked - loop);
    out.clear();
    if (valid == 0) return false;
    while (out.size() < count) {
        const auto x = static_cast<NodeId>(uniform_index(rng, g.node_count()));
        if (x == anchor) continue;
        if (target ? g.has_edge(anchor, e.relation, x) : g.has_edge(x, e.relation, anchor)) continue;
        out.push_back(x);
    }
    return true;
}

}  // namespace

AssocTrainResult train_association(const MultiRelGraph& train, const SynsetEmbeddings& embeddings,
                                   const AssocTrainConfig& cfg, std::span<const Edge> dev, const FilterSet& filter) {
    if (train.edge_count() == 0) throw TrainingError("association training graph has no edges");
    if (embeddings.rows() != train.node_count()) {
        throw DimensionError("embedding table has " + std::to_string(embeddings.rows()) + " rows, graph has " +
                             std::to_string(train.node_count()) + " nodes");
    }
    if (cfg.negatives == 0 || cfg.learning_rate <= 0.0 || cfg.max_epochs == 0) {
        throw ConfigError("association training needs positive negatives, learning rate and epoch cap");
    }

    const auto& rel = train.relations();
    std::vector<bool> parameterized(rel.size());
    for (std::size_t r = 0; r < rel.size(); ++r) {
        parameterized[r] = !rel.is_symmetric(static_cast<RelationId>(r)) || cfg.symmetric_every > 0;
    }

    AssocTrainResult result;
    AssociationModel model(cfg.variant, embeddings.vectors, rel, parameterized, mix_seed(cfg.seed, 0));
    AssocAdaGrad opt(model, cfg.learning_rate);
    Rng rng(mix_seed(cfg.seed, 1));

    std::vector<Edge> asymmetric, symmetric;
    for (const auto& e : train.edges()) (rel.is_symmetric(e.relation) ? symmetric : asymmetric).push_back(e);

    result.model = model;
    result.best_dev_mrr = -1.0;
    std::size_t stale = 0;
    std::vector<Edge> order;
    NllInstance inst;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const bool with_sym = cfg.symmetric_every > 0 && epoch % cfg.symmetric_every == 0;
        order = asymmetric;
        if (with_sym) order.insert(order.end(), symmetric.begin(), symmetric.end());
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

        double loss = 0.0;
        for (std::size_t i = 0; i < order.size(); ++i) {
            inst.positive = order[i];
            inst.corrupted = i % 2 == 0 ? Direction::PredictTarget : Direction::PredictSource;
            if (!sample_corruptions(train, inst.positive, inst.corrupted, cfg.negatives, rng, inst.negatives)) continue;
            AssocGradient grad;
            loss += nll_loss(model, std::span(&inst, 1), &grad);
            opt.step(model, grad);
        }
        if (!std::isfinite(loss)) {
            throw TrainingError("association loss diverged at epoch " + std::to_string(epoch));
        }

        const double mrr = dev.empty() ? 0.0 : association_mrr(model, dev, filter);
        result.log.push_back({epoch, loss, mrr, with_sym});
        if (dev.empty() || mrr > result.best_dev_mrr) {
            result.best_dev_mrr = mrr;
            result.best_epoch = epoch;
            result.model = model;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    return result;
}

void write_association(std::ostream& os, const AssociationModel& m, const Interner& nodes,
                       const std::string& config_hash) {
    if (nodes.size() != m.node_count()) throw DimensionError("node table does not match the model");
    const auto& rel = m.relations();
    os << "m3gm-assoc\t1\n";
    os << "config\t" << config_hash << '\n';
    os << "variant\t" << to_string(m.variant()) << '\n';
    os << "dim\t" << m.dim() << '\n';
    os << "relations\t" << rel.size() << '\n';
    for (std::size_t r = 0; r < rel.size(); ++r) {
        os << rel.names[r] << '\t' << (rel.symmetric[r] ? 1 : 0) << '\t'
           << (m.has_parameters(static_cast<RelationId>(r)) ? 1 : 0) << '\n';
    }
    auto write_row = [&os](auto&& row) {
        for (Eigen::Index j = 0; j < row.size(); ++j) os << (j ? " " : "") << format_double(row(j));
        os << '\n';
    };
    os << "nodes\t" << m.node_count() << '\n';
    for (std::size_t i = 0; i < m.node_count(); ++i) {
        os << nodes.name(static_cast<NodeId>(i)) << ' ';
        write_row(m.embeddings().row(static_cast<Eigen::Index>(i)));
    }
    for (std::size_t r = 0; r < rel.size(); ++r) {
        const auto id = static_cast<RelationId>(r);
        if (!m.has_parameters(id)) continue;
        const auto& p = m.relation_parameters(id);
        os << "relation\t" << rel.names[r] << '\t' << p.rows() << '\t' << p.cols() << '\n';
        for (Eigen::Index i = 0; i < p.rows(); ++i) write_row(p.row(i));
    }
    os << "end\n";
}

namespace {

class LineReader {
public:
    explicit LineReader(std::istream& is) : is_(is) {}

    std::string next() {
        std::string line;
        if (!std::getline(is_, line)) throw FormatError("association snapshot truncated after line " + std::to_string(no_));
        ++no_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    }

    std::vector<std::string> fields(char sep, std::size_t expected) {
        auto f = split(next(), sep);
        if (f.size() != expected) fail("expected " + std::to_string(expected) + " fields");
        return f;
    }

    std::string keyed(const std::string& key) {
        auto f = fields('\t', 2);
        if (f[0] != key) fail("expected '" + key + "'");
        return f[1];
    }

    std::size_t count(const std::string& s) {
        std::size_t v = 0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail("bad count '" + s + "'");
        return v;
    }

    void read_row(std::span<const std::string> values, auto&& row) {
        for (Eigen::Index j = 0; j < row.size(); ++j) row(j) = parse_double(values[static_cast<std::size_t>(j)], no_);
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError("association snapshot line " + std::to_string(no_) + ": " + what);
    }

private:
    std::istream& is_;
    std::size_t no_ = 0;
};

}  // namespace

AssociationSnapshot read_association(std::istream& is) {
    LineReader in(is);
    if (in.next() != "m3gm-assoc\t1") in.fail("not an association snapshot");
    AssociationSnapshot snap;
    snap.config_hash = in.keyed("config");
    const auto variant = parse_variant(in.keyed("variant"));
    const auto dim = static_cast<Eigen::Index>(in.count(in.keyed("dim")));
    const auto relation_count = in.count(in.keyed("relations"));
    if (relation_count > kMaxRelations) in.fail("too many relations");
    RelationTable rel;
    std::vector<bool> parameterized;
    for (std::size_t r = 0; r < relation_count; ++r) {
        auto f = in.fields('\t', 3);
        rel.add(f[0], f[1] == "1");
        parameterized.push_back(f[2] == "1");
    }
    const auto n = in.count(in.keyed("nodes"));
    Matrix emb(static_cast<Eigen::Index>(n), dim);
    snap.node_names.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto f = in.fields(' ', static_cast<std::size_t>(dim) + 1);
        snap.node_names.push_back(f[0]);
        in.read_row(std::span(f).subspan(1), emb.row(static_cast<Eigen::Index>(i)));
    }
    snap.model = AssociationModel(variant, std::move(emb), rel, parameterized, 0);
    for (std::size_t r = 0; r < relation_count; ++r) {
        if (!parameterized[r]) continue;
        auto f = in.fields('\t', 4);
        if (f[0] != "relation" || f[1] != rel.names[r]) in.fail("expected parameters of relation '" + rel.names[r] + "'");
        auto& p = snap.model.relation_parameters(static_cast<RelationId>(r));
        const auto rows = static_cast<Eigen::Index>(in.count(f[2]));
        const auto cols = static_cast<Eigen::Index>(in.count(f[3]));
        if (rows != p.rows() || cols != p.cols()) in.fail("parameter shape does not match the variant");
        for (Eigen::Index i = 0; i < rows; ++i) {
            auto values = in.fields(' ', static_cast<std::size_t>(cols));
            in.read_row(values, p.row(i));
        }
    }
    if (in.next() != "end") in.fail("expected 'end'");
    return snap;
}

}  // namespace m3gm
