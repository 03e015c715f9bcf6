#include "m3gm/features.hpp"

#include <algorithm>
#include <bit>
#include <cassert>

namespace m3gm {

namespace {

struct TemplateInfo {
    Template kind;
    const char* name;
    std::size_t arity;
};

constexpr std::array<TemplateInfo, kTemplateCount> kTemplates{{
    {Template::EdgeCount, "edge_count", 1},
    {Template::Cycle2, "cycle2", 2},
    {Template::Cycle3, "cycle3", 3},
    {Template::OutExactly1, "out_exactly1", 1},
    {Template::OutExactly2, "out_exactly2", 2},
    {Template::OutExactly3, "out_exactly3", 3},
    {Template::InExactly1, "in_exactly1", 1},
    {Template::InExactly2, "in_exactly2", 2},
    {Template::InExactly3, "in_exactly3", 3},
    {Template::OutAtLeast1, "out_at_least1", 1},
    {Template::OutAtLeast2, "out_at_least2", 2},
    {Template::OutAtLeast3, "out_at_least3", 3},
    {Template::InAtLeast1, "in_at_least1", 1},
    {Template::InAtLeast2, "in_at_least2", 2},
    {Template::InAtLeast3, "in_at_least3", 3},
    {Template::Path2, "path2", 2},
    {Template::Transitivity, "transitivity", 3},
}};

bool is_degree(Template t) {
    return t >= Template::OutExactly1 && t <= Template::InAtLeast3;
}

}  // namespace

const char* template_name(Template t) { return kTemplates[static_cast<std::size_t>(t)].name; }

std::optional<Template> parse_template(std::string_view name) {
    for (const auto& info : kTemplates) {
        if (name == info.name) return info.kind;
    }
    return std::nullopt;
}

std::size_t template_arity(Template t) { return kTemplates[static_cast<std::size_t>(t)].arity; }

Template degree_template(DegreeSide side, DegreeRule rule, std::size_t k) {
    assert(k >= 1 && k <= 3);
    std::size_t base = static_cast<std::size_t>(Template::OutExactly1);
    if (side == DegreeSide::In) base += 3;
    if (rule == DegreeRule::AtLeast) base += 6;
    return static_cast<Template>(base + k - 1);
}

FeatureId canonicalize(FeatureId id) {
    auto& r = id.relations;
    const std::size_t k = id.arity();
    for (std::size_t i = k; i < 3; ++i) r[i] = 0;
    if (id.kind == Template::Cycle2 || is_degree(id.kind)) {
        std::sort(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(k));
    } else if (id.kind == Template::Cycle3) {
        std::array<RelationId, 3> best = r;
        for (int shift = 1; shift < 3; ++shift) {
            std::array<RelationId, 3> rot{r[shift % 3], r[(shift + 1) % 3], r[(shift + 2) % 3]};
            best = std::min(best, rot);
        }
        r = best;
    }
    return id;
}

FeatureRegistry::FeatureRegistry(std::size_t relation_count) : relation_count_(relation_count) {
    if (relation_count == 0) throw std::invalid_argument("feature registry needs at least one relation");
    if (relation_count > kMaxRelations) throw std::invalid_argument("too many relations for registry");
    const std::size_t n = relation_count;
    for (const auto& info : kTemplates) {
        const std::size_t k = info.arity;
        std::size_t total = 1;
        for (std::size_t i = 0; i < k; ++i) total *= n;
        auto& table = lookup_[static_cast<std::size_t>(info.kind)];
        table.assign(total, kNone);
        // Tuples are visited in lexicographic order and every canonical form is
        // the lexicographic minimum of its class, so it is registered before
        // any other member of the class is visited.
        for (std::size_t code = 0; code < total; ++code) {
            FeatureId id{info.kind, {}};
            std::size_t rest = code;
            for (std::size_t i = k; i-- > 0;) {
                id.relations[i] = static_cast<RelationId>(rest % n);
                rest /= n;
            }
            const FeatureId canon = canonicalize(id);
            if (canon == id) {
                table[code] = static_cast<std::uint32_t>(features_.size());
                features_.push_back(canon);
            } else {
                std::size_t canon_code = 0;
                for (std::size_t i = 0; i < k; ++i) canon_code = canon_code * n + canon.relations[i];
                table[code] = table[canon_code];
            }
        }
    }
    denominator_.assign(features_.size(), kNone);
    for (std::size_t i = 0; i < features_.size(); ++i) {
        if (features_[i].kind == Template::Transitivity) {
            denominator_[i] = path2(features_[i].relations[0], features_[i].relations[1]);
        }
    }
}

std::optional<std::size_t> FeatureRegistry::find(const FeatureId& id) const {
    const std::size_t k = id.arity();
    std::size_t code = 0;
    for (std::size_t i = 0; i < k; ++i) {
        if (id.relations[i] >= relation_count_) return std::nullopt;
        code = code * relation_count_ + id.relations[i];
    }
    const auto v = lookup_[idx(id.kind)][code];
    if (v == kNone) return std::nullopt;
    return v;
}

std::uint32_t FeatureRegistry::degree(Template t, std::span<const RelationId> sorted) const {
    std::size_t code = 0;
    for (RelationId r : sorted) code = code * relation_count_ + r;
    return lookup_[idx(t)][code];
}

std::string FeatureRegistry::relation_label(std::size_t index, const RelationTable& relations) const {
    const auto& f = features_.at(index);
    std::string out;
    for (std::size_t i = 0; i < f.arity(); ++i) {
        if (i) out += ',';
        out += relations.names.at(f.relations[i]);
    }
    return out;
}

std::optional<std::size_t> FeatureRegistry::parse(std::string_view templ, std::string_view relations,
                                                  const RelationTable& table) const {
    const auto kind = parse_template(templ);
    if (!kind) return std::nullopt;
    FeatureId id{*kind, {}};
    std::size_t count = 0;
    while (true) {
        const auto comma = relations.find(',');
        const auto name = relations.substr(0, comma);
        const auto r = table.find(name);
        if (!r || count >= 3) return std::nullopt;
        id.relations[count++] = *r;
        if (comma == std::string_view::npos) break;
        relations.remove_prefix(comma + 1);
    }
    if (count != id.arity()) return std::nullopt;
    return find(id);
}

FeatureRegistry build_registry(const RelationTable& relations) { return FeatureRegistry(relations.size()); }

FeatureVector::FeatureVector(const FeatureRegistry& registry)
    : registry_(&registry), counts_(registry.size(), 0) {}

double FeatureVector::value(std::size_t index) const {
    if (!registry_->is_transitivity(index)) return static_cast<double>(counts_.at(index));
    const auto den = counts_[registry_->denominator(index)];
    return den == 0 ? 0.0 : static_cast<double>(counts_[index]) / static_cast<double>(den);
}

Vector FeatureVector::values() const {
    Vector v(static_cast<Eigen::Index>(counts_.size()));
    for (std::size_t i = 0; i < counts_.size(); ++i) v[static_cast<Eigen::Index>(i)] = value(i);
    return v;
}

void FeatureVector::apply(const FeatureDelta& delta) {
    if (delta.dimension != counts_.size()) throw DimensionError("feature delta dimension mismatch");
    for (const auto& [i, d] : delta.counts) counts_[i] += d;
}

namespace {

template <typename Fn>
void for_each_bit(std::uint64_t mask, Fn&& fn) {
    while (mask) {
        const int b = std::countr_zero(mask);
        fn(static_cast<RelationId>(b));
        mask &= mask - 1;
    }
}

// The graph minus at most one hidden edge. All motif queries go through this
// view so deltas can be evaluated against G \ {removed} without mutating G.
class GraphView {
public:
    GraphView(const MultiRelGraph& g, const Edge* hidden) : g_(g), hidden_(hidden) {}

    const MultiRelGraph& graph() const { return g_; }

    std::uint64_t mask(NodeId u, NodeId v) const {
        std::uint64_t m = g_.relation_mask(u, v);
        if (hidden_ && hidden_->source == u && hidden_->target == v) m &= ~(std::uint64_t{1} << hidden_->relation);
        return m;
    }

    // Loop-free degree.
    std::int64_t out_degree(NodeId v, RelationId r) const {
        std::int64_t d = static_cast<std::int64_t>(g_.out_degree(v, r));
        if ((g_.relation_mask(v, v) >> r) & 1U) --d;
        if (hidden_ && !hidden_->is_loop() && hidden_->source == v && hidden_->relation == r) --d;
        return d;
    }

    std::int64_t in_degree(NodeId v, RelationId r) const {
        std::int64_t d = static_cast<std::int64_t>(g_.in_degree(v, r));
        if ((g_.relation_mask(v, v) >> r) & 1U) --d;
        if (hidden_ && !hidden_->is_loop() && hidden_->target == v && hidden_->relation == r) --d;
        return d;
    }

    struct Side {
        std::span<const Neighbor> list;
        NodeId owner;
        bool outgoing;
    };

    Side out(NodeId v) const { return {g_.out_neighbors(v), v, true}; }
    Side in(NodeId v) const { return {g_.in_neighbors(v), v, false}; }

    // Calls fn(w, mask_x, mask_y) for every node w adjacent to both sides,
    // where mask_x / mask_y are the relation sets on the respective edges.
    // Adjacency lists are sorted by node id, so this is a linear merge.
    template <typename Fn>
    void intersect(const Side& x, const Side& y, Fn&& fn) const {
        std::size_t i = 0, j = 0;
        while (i < x.list.size() && j < y.list.size()) {
            const NodeId nx = x.list[i].node;
            const NodeId ny = y.list[j].node;
            if (nx < ny) {
                ++i;
            } else if (ny < nx) {
                ++j;
            } else {
                std::uint64_t mx = 0, my = 0;
                while (i < x.list.size() && x.list[i].node == nx) mx |= std::uint64_t{1} << x.list[i++].relation;
                while (j < y.list.size() && y.list[j].node == nx) my |= std::uint64_t{1} << y.list[j++].relation;
                if (nx == x.owner || nx == y.owner) continue;
                mx = strip_hidden(x, nx, mx);
                my = strip_hidden(y, nx, my);
                if (mx && my) fn(nx, mx, my);
            }
        }
    }

private:
    std::uint64_t strip_hidden(const Side& side, NodeId other, std::uint64_t m) const {
        if (!hidden_) return m;
        const NodeId s = side.outgoing ? side.owner : other;
        const NodeId t = side.outgoing ? other : side.owner;
        if (hidden_->source == s && hidden_->target == t) m &= ~(std::uint64_t{1} << hidden_->relation);
        return m;
    }

    const MultiRelGraph& g_;
    const Edge* hidden_;
};

// Sparse accumulator of raw counter changes.
struct SparseCounts {
    std::vector<std::pair<std::uint32_t, std::int64_t>> entries;

    void add(std::uint32_t index, std::int64_t amount) { entries.emplace_back(index, amount); }

    std::vector<std::pair<std::uint32_t, std::int64_t>> finish() {
        std::sort(entries.begin(), entries.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<std::pair<std::uint32_t, std::int64_t>> merged;
        for (const auto& [i, d] : entries) {
            if (!merged.empty() && merged.back().first == i) {
                merged.back().second += d;
            } else {
                merged.emplace_back(i, d);
            }
        }
        std::erase_if(merged, [](const auto& e) { return e.second == 0; });
        return merged;
    }
};

struct DenseCounts {
    std::vector<std::int64_t>& counts;
    void add(std::uint32_t index, std::int64_t amount) { counts[index] += amount; }
};

// Per-relation loop-free degree profile of one node on one side.
using Profile = std::vector<std::int64_t>;

// Adds `sign` for every degree-bucket feature the profile belongs to: the
// Exactly bucket for its full multiset when it has 1..3 edges, and every
// AtLeast bucket whose multiset (size 1..3) it dominates.
template <typename Acc>
void add_profile(const FeatureRegistry& reg, DegreeSide side, const Profile& profile, std::int64_t sign,
                 Acc& acc) {
    std::int64_t total = 0;
    for (auto d : profile) total += d;
    if (total == 0) return;
    std::array<RelationId, 3> buf{};
    if (total <= 3) {
        std::size_t k = 0;
        for (std::size_t r = 0; r < profile.size(); ++r) {
            for (std::int64_t c = 0; c < profile[r]; ++c) buf[k++] = static_cast<RelationId>(r);
        }
        acc.add(reg.degree(degree_template(side, DegreeRule::Exactly, k), std::span(buf.data(), k)), sign);
    }
    // Sub-multisets of size 1..3 in non-decreasing relation order.
    auto recurse = [&](auto&& self, std::size_t from, std::size_t depth) -> void {
        for (std::size_t r = from; r < profile.size(); ++r) {
            std::int64_t used = 0;
            for (std::size_t i = 0; i < depth; ++i) used += (buf[i] == r);
            if (profile[r] <= used) continue;
            buf[depth] = static_cast<RelationId>(r);
            acc.add(reg.degree(degree_template(side, DegreeRule::AtLeast, depth + 1), std::span(buf.data(), depth + 1)),
                    sign);
            if (depth + 1 < 3) self(self, r, depth + 1);
        }
    };
    recurse(recurse, 0, 0);
}

// Change of all path/cycle/transitivity counters when the non-loop edge
// e = (a, r, b) is added to the view (sign +1) or when it is the difference
// between view+e and view (sign -1 gives the removal).
template <typename Acc>
void add_edge_incidence(const FeatureRegistry& reg, const GraphView& h, const Edge& e, std::int64_t sign,
                        Acc& acc) {
    const NodeId a = e.source;
    const NodeId b = e.target;
    const RelationId r = e.relation;
    const std::size_t nr = h.graph().relation_count();
    const std::uint64_t back = h.mask(b, a);

    for_each_bit(back, [&](RelationId q) { acc.add(reg.cycle2(r, q), sign); });

    // Paths a -r-> b -q-> w and u -q-> a -r-> b; the back edges b -> a are
    // excluded because they would close a 2-cycle, not a path.
    for (std::size_t qi = 0; qi < nr; ++qi) {
        const auto q = static_cast<RelationId>(qi);
        const std::int64_t back_q = (back >> q) & 1U;
        const std::int64_t as_first = h.out_degree(b, q) - back_q;
        const std::int64_t as_second = h.in_degree(a, q) - back_q;
        if (as_first) acc.add(reg.path2(r, q), sign * as_first);
        if (as_second) acc.add(reg.path2(q, r), sign * as_second);
    }

    // 3-cycles a -r-> b -q2-> w -q3-> a.
    h.intersect(h.out(b), h.in(a), [&](NodeId, std::uint64_t m_bw, std::uint64_t m_wa) {
        for_each_bit(m_bw, [&](RelationId q2) {
            for_each_bit(m_wa, [&](RelationId q3) { acc.add(reg.cycle3(r, q2, q3), sign); });
        });
    });
    // e as first edge: a -r-> b -q2-> w closed by a -q3-> w.
    h.intersect(h.out(b), h.out(a), [&](NodeId, std::uint64_t m_bw, std::uint64_t m_aw) {
        for_each_bit(m_bw, [&](RelationId q2) {
            for_each_bit(m_aw, [&](RelationId q3) { acc.add(reg.transitivity(r, q2, q3), sign); });
        });
    });
    // e as second edge: u -q1-> a -r-> b closed by u -q3-> b.
    h.intersect(h.in(a), h.in(b), [&](NodeId, std::uint64_t m_ua, std::uint64_t m_ub) {
        for_each_bit(m_ua, [&](RelationId q1) {
            for_each_bit(m_ub, [&](RelationId q3) { acc.add(reg.transitivity(q1, r, q3), sign); });
        });
    });
    // e as closing edge of a -q1-> v -q2-> b.
    h.intersect(h.out(a), h.in(b), [&](NodeId, std::uint64_t m_av, std::uint64_t m_vb) {
        for_each_bit(m_av, [&](RelationId q1) {
            for_each_bit(m_vb, [&](RelationId q2) { acc.add(reg.transitivity(q1, q2, r), sign); });
        });
    });
}

Profile profile_of(const GraphView& h, NodeId v, DegreeSide side) {
    const std::size_t nr = h.graph().relation_count();
    Profile p(nr, 0);
    for (std::size_t r = 0; r < nr; ++r) {
        p[r] = side == DegreeSide::Out ? h.out_degree(v, static_cast<RelationId>(r))
                                       : h.in_degree(v, static_cast<RelationId>(r));
    }
    return p;
}

void check_compatible(const MultiRelGraph& g, const FeatureRegistry& reg) {
    if (g.relation_count() > reg.relation_count()) {
        throw DimensionError("graph has relations unknown to the feature registry");
    }
}

FeatureDelta delta_change(const MultiRelGraph& g, const FeatureRegistry& reg, const Edge* removed,
                          const Edge* added, const FeatureVector& before) {
    check_compatible(g, reg);
    if (before.size() != reg.size()) throw DimensionError("feature vector does not match registry");
    if (removed && !g.has_edge(*removed)) throw MissingEdgeError("removed edge is not in the graph");
    if (added && g.has_edge(*added)) throw DuplicateEdgeError("added edge is already in the graph");

    const GraphView h(g, removed);
    SparseCounts acc;
    const bool remove_live = removed && !removed->is_loop();
    const bool add_live = added && !added->is_loop();

    if (remove_live) {
        acc.add(reg.edge_count(removed->relation), -1);
        add_edge_incidence(reg, h, *removed, -1, acc);
    }
    if (add_live) {
        acc.add(reg.edge_count(added->relation), +1);
        add_edge_incidence(reg, h, *added, +1, acc);
    }

    // Degree buckets: re-evaluate the profile of each touched (node, side).
    struct Touch {
        NodeId node;
        DegreeSide side;
        RelationId relation;
        std::int64_t change;
    };
    std::vector<Touch> touches;
    if (remove_live) {
        touches.push_back({removed->source, DegreeSide::Out, removed->relation, -1});
        touches.push_back({removed->target, DegreeSide::In, removed->relation, -1});
    }
    if (add_live) {
        touches.push_back({added->source, DegreeSide::Out, added->relation, +1});
        touches.push_back({added->target, DegreeSide::In, added->relation, +1});
    }
    const GraphView full(g, nullptr);
    for (std::size_t i = 0; i < touches.size(); ++i) {
        bool seen = false;
        for (std::size_t j = 0; j < i; ++j) {
            seen |= touches[j].node == touches[i].node && touches[j].side == touches[i].side;
        }
        if (seen) continue;
        Profile old_profile = profile_of(full, touches[i].node, touches[i].side);
        Profile new_profile = old_profile;
        for (const auto& t : touches) {
            if (t.node == touches[i].node && t.side == touches[i].side) new_profile[t.relation] += t.change;
        }
        if (old_profile == new_profile) continue;
        add_profile(reg, touches[i].side, old_profile, -1, acc);
        add_profile(reg, touches[i].side, new_profile, +1, acc);
    }

    FeatureDelta delta;
    delta.dimension = reg.size();
    delta.counts = acc.finish();

    auto count_change = [&](std::uint32_t index) -> std::int64_t {
        auto it = std::lower_bound(delta.counts.begin(), delta.counts.end(), index,
                                   [](const auto& e, std::uint32_t i) { return e.first < i; });
        return (it != delta.counts.end() && it->first == index) ? it->second : 0;
    };

    std::vector<std::uint32_t> transitivity;
    for (const auto& [i, d] : delta.counts) {
        const auto& f = reg.feature(i);
        if (f.kind == Template::Transitivity) {
            transitivity.push_back(i);
        } else {
            delta.values.emplace_back(i, static_cast<double>(d));
            if (f.kind == Template::Path2) {
                for (std::size_t c = 0; c < reg.relation_count(); ++c) {
                    transitivity.push_back(
                        reg.transitivity(f.relations[0], f.relations[1], static_cast<RelationId>(c)));
                }
            }
        }
    }
    std::sort(transitivity.begin(), transitivity.end());
    transitivity.erase(std::unique(transitivity.begin(), transitivity.end()), transitivity.end());
    for (auto i : transitivity) {
        const auto den_index = reg.denominator(i);
        const std::int64_t num = before.count(i) + count_change(i);
        const std::int64_t den = before.count(den_index) + count_change(den_index);
        assert(num >= 0 && num <= den);
        const double after = den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
        const double diff = after - before.value(i);
        if (diff != 0.0) delta.values.emplace_back(i, diff);
    }
    std::sort(delta.values.begin(), delta.values.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return delta;
}

}  // namespace

FeatureVector count_all(const MultiRelGraph& g, const FeatureRegistry& reg) {
    check_compatible(g, reg);
    FeatureVector fv(reg);
    DenseCounts acc{fv.mutable_counts()};
    const GraphView h(g, nullptr);
    const std::size_t nr = g.relation_count();
    const std::size_t n = g.node_count();

    // Raw tallies: every 2-cycle is seen from both of its edges, every 3-cycle
    // from each of its three edges.
    std::vector<std::int64_t> cycle2_raw(reg.size(), 0), cycle3_raw(reg.size(), 0);
    std::vector<std::int64_t> back_pairs(nr * nr, 0);  // ordered (q1, q2) 2-cycles u-q1->v-q2->u

    for (NodeId u = 0; u < n; ++u) {
        for (const auto& nb : g.out_neighbors(u)) {
            if (nb.node == u) continue;
            const NodeId v = nb.node;
            const RelationId r = nb.relation;
            acc.add(reg.edge_count(r), 1);
            for_each_bit(g.relation_mask(v, u), [&](RelationId q) {
                ++cycle2_raw[reg.cycle2(r, q)];
                ++back_pairs[r * nr + q];
            });
            h.intersect(h.out(v), h.in(u), [&](NodeId, std::uint64_t m_vw, std::uint64_t m_wu) {
                for_each_bit(m_vw, [&](RelationId q2) {
                    for_each_bit(m_wu, [&](RelationId q3) { ++cycle3_raw[reg.cycle3(r, q2, q3)]; });
                });
            });
            // (u, r, v) as the closing edge of u -q1-> w -q2-> v.
            h.intersect(h.out(u), h.in(v), [&](NodeId, std::uint64_t m_uw, std::uint64_t m_wv) {
                for_each_bit(m_uw, [&](RelationId q1) {
                    for_each_bit(m_wv, [&](RelationId q2) { acc.add(reg.transitivity(q1, q2, r), 1); });
                });
            });
        }
    }
    for (std::size_t i = 0; i < reg.size(); ++i) {
        assert(cycle2_raw[i] % 2 == 0 && cycle3_raw[i] % 3 == 0);
        fv.mutable_counts()[i] += cycle2_raw[i] / 2 + cycle3_raw[i] / 3;
    }

    for (NodeId v = 0; v < n; ++v) {
        const Profile out_p = profile_of(h, v, DegreeSide::Out);
        const Profile in_p = profile_of(h, v, DegreeSide::In);
        add_profile(reg, DegreeSide::Out, out_p, 1, acc);
        add_profile(reg, DegreeSide::In, in_p, 1, acc);
        for (std::size_t q1 = 0; q1 < nr; ++q1) {
            if (!in_p[q1]) continue;
            for (std::size_t q2 = 0; q2 < nr; ++q2) {
                if (out_p[q2]) {
                    acc.add(reg.path2(static_cast<RelationId>(q1), static_cast<RelationId>(q2)), in_p[q1] * out_p[q2]);
                }
            }
        }
    }
    for (std::size_t q1 = 0; q1 < nr; ++q1) {
        for (std::size_t q2 = 0; q2 < nr; ++q2) {
            acc.add(reg.path2(static_cast<RelationId>(q1), static_cast<RelationId>(q2)), -back_pairs[q1 * nr + q2]);
        }
    }
    return fv;
}

FeatureDelta delta_substitute(const MultiRelGraph& g, const FeatureRegistry& registry, const Edge& removed,
                              const Edge& added, const FeatureVector& before) {
    if (removed.source != added.source || removed.relation != added.relation) {
        throw GraphError("substitution must keep source and relation");
    }
    if (removed.target == added.target) throw DuplicateEdgeError("substitution to the same target");
    return delta_change(g, registry, &removed, &added, before);
}

FeatureDelta delta_insert(const MultiRelGraph& g, const FeatureRegistry& registry, const Edge& added,
                          const FeatureVector& before) {
    return delta_change(g, registry, nullptr, &added, before);
}

double score_delta(const Vector& theta, const FeatureDelta& delta) {
    if (static_cast<std::size_t>(theta.size()) != delta.dimension) {
        throw DimensionError("theta has " + std::to_string(theta.size()) + " entries, delta expects " +
                             std::to_string(delta.dimension));
    }
    double s = 0.0;
    for (const auto& [i, v] : delta.values) s += theta[i] * v;
    return s;
}

}  // namespace m3gm
