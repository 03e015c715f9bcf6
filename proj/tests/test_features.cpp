#include "doctest.h"

#include "m3gm/features.hpp"
#include "test_support.hpp"

#include <numeric>
#include <set>

using namespace m3gm;
using testing_support::random_graph;
using testing_support::relations;

namespace {

std::size_t index_of(const FeatureRegistry& reg, Template t, std::vector<RelationId> rels) {
    FeatureId id{t, {}};
    for (std::size_t i = 0; i < rels.size(); ++i) id.relations[i] = rels[i];
    const auto found = reg.find(id);
    REQUIRE(found.has_value());
    return *found;
}

void check_against_oracle(const MultiRelGraph& g, const FeatureRegistry& reg) {
    const auto fv = count_all(g, reg);
    const auto brute = oracle::census(static_cast<int>(g.node_count()), static_cast<int>(g.relation_count()),
                                      testing_support::triples(g));
    REQUIRE(brute.size() == reg.size());
    for (std::size_t i = 0; i < reg.size(); ++i) {
        const auto k = oracle::library_key(reg, i);
        INFO(k);
        CHECK(fv.value(i) == doctest::Approx(brute.at(k)).epsilon(1e-12));
    }
}

}  // namespace

TEST_CASE("registry sizes") {
    CHECK(FeatureRegistry(1).size() == 17);

    // Enumeration oracle: all tuples per template, canonicalized independently.
    const auto two = oracle::zero_census(2);
    const FeatureRegistry reg2(2);
    CHECK(reg2.size() == two.size());
    std::set<std::string> keys;
    for (std::size_t i = 0; i < reg2.size(); ++i) keys.insert(oracle::library_key(reg2, i));
    CHECK(keys.size() == reg2.size());
    for (const auto& [k, v] : two) CHECK(keys.count(k) == 1);

    const FeatureRegistry reg11(11);
    CHECK(reg11.size() == oracle::zero_census(11).size());
    CHECK(reg11.size() >= 2000);
    CHECK(reg11.size() <= 4000);
    CHECK(reg11.size() == 3432);
}

TEST_CASE("registry order and lookups") {
    const FeatureRegistry reg(3);
    for (std::size_t i = 1; i < reg.size(); ++i) {
        const auto& a = reg.feature(i - 1);
        const auto& b = reg.feature(i);
        CHECK((a.kind < b.kind || (a.kind == b.kind && a.relations < b.relations)));
    }
    CHECK(reg.cycle3(2, 0, 1) == reg.cycle3(0, 1, 2));
    CHECK(reg.cycle3(0, 2, 1) != reg.cycle3(0, 1, 2));
    CHECK(reg.cycle2(2, 1) == reg.cycle2(1, 2));
    CHECK(reg.path2(0, 1) != reg.path2(1, 0));
    const auto t = reg.transitivity(0, 1, 2);
    CHECK(reg.denominator(t) == reg.path2(0, 1));

    RelationTable table = relations(3);
    for (std::size_t i = 0; i < reg.size(); ++i) {
        const auto parsed =
            reg.parse(template_name(reg.feature(i).kind), reg.relation_label(i, table), table);
        REQUIRE(parsed.has_value());
        CHECK(*parsed == i);
    }
    CHECK_FALSE(reg.parse("cycle3", "r0,r1", table).has_value());
    CHECK_FALSE(reg.parse("nonsense", "r0", table).has_value());
}

TEST_CASE("worked motif examples") {
    SUBCASE("three-node hypernym cycle") {
        MultiRelGraph g(3, relations(1));
        g.add_edge({0, 0, 1});
        g.add_edge({1, 0, 2});
        g.add_edge({2, 0, 0});
        const FeatureRegistry reg(1);
        const auto fv = count_all(g, reg);
        CHECK(fv.value(index_of(reg, Template::Cycle3, {0, 0, 0})) == 1);
        CHECK(fv.value(index_of(reg, Template::Cycle2, {0, 0})) == 0);
        CHECK(fv.value(index_of(reg, Template::Path2, {0, 0})) == 3);
        CHECK(fv.value(index_of(reg, Template::Transitivity, {0, 0, 0})) == 0);
        check_against_oracle(g, reg);
    }
    SUBCASE("cat with two hypernyms") {
        // cat=0, mammal=1, boat=2
        MultiRelGraph g(3, relations(1));
        g.add_edge({0, 0, 1});
        g.add_edge({0, 0, 2});
        const FeatureRegistry reg(1);
        const auto fv = count_all(g, reg);
        CHECK(fv.value(index_of(reg, Template::OutExactly2, {0, 0})) == 1);
        CHECK(fv.value(index_of(reg, Template::OutExactly1, {0})) == 0);
        CHECK(fv.value(index_of(reg, Template::InExactly1, {0})) == 2);
        CHECK(fv.value(index_of(reg, Template::Path2, {0, 0})) == 0);
        check_against_oracle(g, reg);
    }
    SUBCASE("closed triangle has transitivity one") {
        MultiRelGraph g(3, relations(1));
        g.add_edge({0, 0, 1});
        g.add_edge({1, 0, 2});
        g.add_edge({0, 0, 2});
        const FeatureRegistry reg(1);
        CHECK(count_all(g, reg).value(index_of(reg, Template::Transitivity, {0, 0, 0})) == 1.0);
    }
    SUBCASE("mixed-relation degree bucket") {
        // One node with exactly one r0 and one r1 out-edge.
        MultiRelGraph g(3, relations(2));
        g.add_edge({0, 0, 1});
        g.add_edge({0, 1, 2});
        const FeatureRegistry reg(2);
        const auto fv = count_all(g, reg);
        CHECK(fv.value(index_of(reg, Template::OutExactly2, {0, 1})) == 1);
        CHECK(fv.value(index_of(reg, Template::OutExactly2, {0, 0})) == 0);
        CHECK(fv.value(index_of(reg, Template::OutAtLeast1, {1})) == 1);
        CHECK(fv.value(index_of(reg, Template::OutAtLeast2, {1, 1})) == 0);
    }
    SUBCASE("empty graph") {
        MultiRelGraph g(5, relations(2));
        const FeatureRegistry reg(2);
        const auto fv = count_all(g, reg);
        for (std::size_t i = 0; i < reg.size(); ++i) CHECK(fv.value(i) == 0.0);
    }
}

TEST_CASE("count_all matches brute force on random graphs") {
    Rng rng(99);
    for (std::size_t nr = 1; nr <= 3; ++nr) {
        const FeatureRegistry reg(nr);
        for (int trial = 0; trial < 8; ++trial) {
            const double density = 0.05 + 0.05 * trial;
            check_against_oracle(random_graph(rng, 14, nr, density), reg);
        }
    }
}

TEST_CASE("delta_substitute on a single edge") {
    MultiRelGraph g(3, relations(1));
    g.add_edge({0, 0, 1});
    const FeatureRegistry reg(1);
    const auto before = count_all(g, reg);
    const auto delta = delta_substitute(g, reg, {0, 0, 1}, {0, 0, 2}, before);
    // Old and new target swap roles; nothing changes in aggregate.
    for (const auto& [i, d] : delta.counts) CHECK(i != reg.edge_count(0));
    auto after = before;
    after.apply(delta);
    g.substitute_target(0, 0, 1, 2);
    CHECK(after == count_all(g, reg));
}

TEST_CASE("delta_substitute that closes a triangle") {
    // u=0 -r0-> v=1 -r1-> w=2, u -r2-> x=3 moves to u -r2-> w.
    MultiRelGraph g(4, relations(3));
    g.add_edge({0, 0, 1});
    g.add_edge({1, 1, 2});
    g.add_edge({0, 2, 3});
    const FeatureRegistry reg(3);
    const auto before = count_all(g, reg);
    const auto delta = delta_substitute(g, reg, {0, 2, 3}, {0, 2, 2}, before);
    auto after = before;
    after.apply(delta);
    const auto closed = reg.transitivity(0, 1, 2);
    CHECK(after.count(closed) == before.count(closed) + 1);
    CHECK(after.value(closed) == 1.0);
    for (std::size_t i = 0; i < reg.size(); ++i) {
        if (reg.feature(i).kind == Template::Cycle3) CHECK(after.count(i) == before.count(i));
    }
    g.substitute_target(0, 2, 3, 2);
    CHECK(after == count_all(g, reg));
}

TEST_CASE("incremental deltas equal full recount") {
    Rng rng(31337);
    const FeatureRegistry reg(3);
    int checked = 0;
    for (int trial = 0; trial < 300; ++trial) {
        auto g = random_graph(rng, 30, 3, 0.02 + 0.08 * uniform_unit(rng), trial % 5 == 0);
        const auto edges = g.edges();
        if (edges.empty()) continue;
        const auto before = count_all(g, reg);

        const auto e = edges[uniform_index(rng, edges.size())];
        const auto t = static_cast<NodeId>(uniform_index(rng, 30));
        if (!g.has_edge(e.source, e.relation, t)) {
            const Edge added{e.source, e.relation, t};
            const auto delta = delta_substitute(g, reg, e, added, before);
            auto updated = before;
            updated.apply(delta);
            auto h = g;
            h.substitute_target(e.source, e.relation, e.target, t);
            const auto recount = count_all(h, reg);
            CHECK(updated == recount);
            // Materialized value changes agree with the recount as well.
            Vector diff = recount.values() - before.values();
            Vector sparse = Vector::Zero(diff.size());
            for (const auto& [i, v] : delta.values) sparse[i] = v;
            CHECK((diff - sparse).cwiseAbs().maxCoeff() <= 1e-9);
            ++checked;
        }

        const Edge insert{static_cast<NodeId>(uniform_index(rng, 30)), static_cast<RelationId>(uniform_index(rng, 3)),
                          static_cast<NodeId>(uniform_index(rng, 30))};
        if (!g.has_edge(insert)) {
            auto updated = before;
            updated.apply(delta_insert(g, reg, insert, before));
            g.add_edge(insert);
            CHECK(updated == count_all(g, reg));
        }
    }
    CHECK(checked > 200);
}

TEST_CASE("delta preconditions") {
    MultiRelGraph g(3, relations(2));
    g.add_edge({0, 0, 1});
    g.add_edge({0, 0, 2});
    const FeatureRegistry reg(2);
    const auto fv = count_all(g, reg);
    CHECK_THROWS_AS(delta_substitute(g, reg, {1, 0, 2}, {1, 0, 0}, fv), MissingEdgeError);
    CHECK_THROWS_AS(delta_substitute(g, reg, {0, 0, 1}, {0, 0, 2}, fv), DuplicateEdgeError);
    CHECK_THROWS_AS(delta_substitute(g, reg, {0, 0, 1}, {0, 1, 2}, fv), GraphError);
    CHECK_THROWS_AS(delta_insert(g, reg, {0, 0, 1}, fv), DuplicateEdgeError);
    const FeatureRegistry small(1);
    CHECK_THROWS_AS(count_all(g, small), DimensionError);
}

TEST_CASE("score_delta") {
    const FeatureRegistry reg(2);
    Vector theta = Vector::LinSpaced(static_cast<Eigen::Index>(reg.size()), -1.0, 2.0);

    FeatureDelta zero;
    zero.dimension = reg.size();
    CHECK(score_delta(theta, zero) == 0.0);

    FeatureDelta one = zero;
    one.values.emplace_back(7, 1.0);
    CHECK(score_delta(theta, one) == theta[7]);

    CHECK_THROWS_AS(score_delta(Vector::Zero(3), one), DimensionError);

    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        auto g = random_graph(rng, 20, 2, 0.1);
        const auto edges = g.edges();
        if (edges.empty()) continue;
        for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = uniform_unit(rng) * 2 - 1;
        const auto e = edges[uniform_index(rng, edges.size())];
        const auto t = static_cast<NodeId>(uniform_index(rng, 20));
        if (g.has_edge(e.source, e.relation, t)) continue;
        const auto before = count_all(g, reg);
        const auto delta = delta_substitute(g, reg, e, {e.source, e.relation, t}, before);
        g.substitute_target(e.source, e.relation, e.target, t);
        const double full = theta.dot(count_all(g, reg).values()) - theta.dot(before.values());
        CHECK(score_delta(theta, delta) == doctest::Approx(full).epsilon(1e-9));
    }
}

TEST_CASE("relation relabeling permutes features") {
    Rng rng(8);
    const FeatureRegistry reg(3);
    const std::array<RelationId, 3> perm{2, 0, 1};
    for (int trial = 0; trial < 10; ++trial) {
        auto g = random_graph(rng, 15, 3, 0.12);
        MultiRelGraph h(15, relations(3));
        for (const auto& e : g.edges()) h.add_edge({e.source, perm[e.relation], e.target});
        const auto fg = count_all(g, reg);
        const auto fh = count_all(h, reg);
        for (std::size_t i = 0; i < reg.size(); ++i) {
            FeatureId id = reg.feature(i);
            for (std::size_t j = 0; j < id.arity(); ++j) id.relations[j] = perm[id.relations[j]];
            CHECK(fh.value(*reg.find(id)) == fg.value(i));
        }
    }
}

TEST_CASE("node relabeling leaves features unchanged") {
    Rng rng(12);
    const FeatureRegistry reg(2);
    for (int trial = 0; trial < 10; ++trial) {
        auto g = random_graph(rng, 16, 2, 0.15);
        std::vector<NodeId> perm(16);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        MultiRelGraph h(16, relations(2));
        for (const auto& e : g.edges()) h.add_edge({perm[e.source], e.relation, perm[e.target]});
        CHECK(count_all(g, reg) == count_all(h, reg));
    }
}

TEST_CASE("at-least buckets are consistent with exactly buckets") {
    Rng rng(21);
    const FeatureRegistry reg(2);
    for (int trial = 0; trial < 20; ++trial) {
        // Out-degree capped at 3 so that every node falls in some Exactly bucket.
        MultiRelGraph g(12, relations(2));
        for (NodeId u = 0; u < 12; ++u) {
            const auto deg = uniform_index(rng, 4);
            for (std::uint64_t k = 0; k < deg; ++k) {
                const Edge e{u, static_cast<RelationId>(uniform_index(rng, 2)), static_cast<NodeId>(uniform_index(rng, 12))};
                if (!e.is_loop() && !g.has_edge(e)) g.add_edge(e);
            }
        }
        const auto fv = count_all(g, reg);
        for (std::size_t i = 0; i < reg.size(); ++i) {
            const auto& f = reg.feature(i);
            if (f.kind < Template::OutAtLeast1 || f.kind > Template::OutAtLeast3) continue;
            const std::size_t k = f.arity();
            std::array<int, 2> need{};
            for (std::size_t j = 0; j < k; ++j) ++need[f.relations[j]];
            // Sum of Exactly buckets whose multiset contains this one.
            std::int64_t sum = 0;
            for (std::size_t e = 0; e < reg.size(); ++e) {
                const auto& x = reg.feature(e);
                if (x.kind < Template::OutExactly1 || x.kind > Template::OutExactly3 || x.arity() < k) continue;
                std::array<int, 2> have{};
                for (std::size_t j = 0; j < x.arity(); ++j) ++have[x.relations[j]];
                if (have[0] >= need[0] && have[1] >= need[1]) sum += fv.count(e);
            }
            CHECK(fv.count(i) == sum);
            // Growing the multiset can only shrink the bucket.
            if (k < 3) {
                for (RelationId extra = 0; extra < 2; ++extra) {
                    FeatureId bigger{degree_template(DegreeSide::Out, DegreeRule::AtLeast, k + 1), f.relations};
                    bigger.relations[k] = extra;
                    CHECK(fv.count(*reg.find(canonicalize(bigger))) <= fv.count(i));
                }
            }
        }
    }
}
