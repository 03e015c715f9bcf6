#include "doctest.h"

#include "m3gm/features.hpp"
#include "m3gm/graph.hpp"
#include "test_support.hpp"

#include <sstream>

using namespace m3gm;
using testing_support::relations;

TEST_CASE("add_edge updates membership and degrees") {
    MultiRelGraph g(3, relations(2));
    g.add_edge({0, 0, 1});
    CHECK(g.edge_count() == 1);
    CHECK(g.edge_count(0) == 1);
    CHECK(g.out_degree(0, 0) == 1);
    CHECK(g.in_degree(1, 0) == 1);
    CHECK(g.has_edge(0, 0, 1));
    CHECK_FALSE(g.has_edge(1, 0, 0));
    CHECK_FALSE(g.has_edge(0, 1, 1));
    CHECK_THROWS_AS(g.add_edge({0, 0, 1}), DuplicateEdgeError);
    CHECK(g.edge_count() == 1);
}

TEST_CASE("self-loops are stored but invisible to motif counting") {
    MultiRelGraph g(3, relations(1));
    g.add_edge({0, 0, 0});
    CHECK(g.edge_count() == 1);
    CHECK(g.has_edge(0, 0, 0));

    const auto reg = build_registry(g.relations());
    const auto fv = count_all(g, reg);
    for (std::size_t i = 0; i < reg.size(); ++i) CHECK(fv.count(i) == 0);

    // Same graph with and without loops on a richer edge set, checked against
    // the brute-force census.
    Rng rng(7);
    auto h = testing_support::random_graph(rng, 8, 2, 0.3, /*loops=*/true);
    MultiRelGraph stripped(8, relations(2));
    for (const auto& e : h.edges()) {
        if (!e.is_loop()) stripped.add_edge(e);
    }
    REQUIRE(h.edge_count() > stripped.edge_count());
    const auto reg2 = build_registry(h.relations());
    CHECK(count_all(h, reg2) == count_all(stripped, reg2));
    const auto brute = oracle::census(8, 2, testing_support::triples(h));
    const auto fv2 = count_all(h, reg2);
    for (std::size_t i = 0; i < reg2.size(); ++i) {
        CHECK(fv2.value(i) == doctest::Approx(brute.at(oracle::library_key(reg2, i))).epsilon(1e-12));
    }
}

TEST_CASE("remove_edge inverts add_edge") {
    const MultiRelGraph empty(4, relations(2));
    MultiRelGraph g = empty;
    g.add_edge({0, 1, 1});
    g.remove_edge({0, 1, 1});
    CHECK(g == empty);
    CHECK_THROWS_AS(g.remove_edge({0, 1, 1}), MissingEdgeError);

    MultiRelGraph three = empty;
    three.add_edge({0, 0, 1});
    three.add_edge({1, 1, 2});
    three.add_edge({2, 0, 3});
    three.remove_edge({1, 1, 2});
    MultiRelGraph two = empty;
    two.add_edge({0, 0, 1});
    two.add_edge({2, 0, 3});
    CHECK(three == two);
}

TEST_CASE("substitute_target conserves edge counts and is an involution") {
    MultiRelGraph g(3, relations(1));
    g.add_edge({0, 0, 1});
    const MultiRelGraph original = g;
    g.substitute_target(0, 0, 1, 2);
    CHECK(g.edge_count() == 1);
    CHECK(g.has_edge(0, 0, 2));
    g.substitute_target(0, 0, 2, 1);
    CHECK(g == original);

    CHECK_THROWS_AS(g.substitute_target(0, 0, 2, 1), MissingEdgeError);
    g.add_edge({0, 0, 2});
    CHECK_THROWS_AS(g.substitute_target(0, 0, 1, 2), DuplicateEdgeError);
}

TEST_CASE("substitute_target matches remove + add on random graphs") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        auto g = testing_support::random_graph(rng, 15, 3, 0.15);
        const auto edges = g.edges();
        if (edges.empty()) continue;
        const auto e = edges[uniform_index(rng, edges.size())];
        NodeId t = static_cast<NodeId>(uniform_index(rng, 15));
        if (g.has_edge(e.source, e.relation, t)) continue;
        auto composed = g;
        composed.remove_edge(e);
        composed.add_edge({e.source, e.relation, t});
        std::vector<std::size_t> per_rel;
        for (RelationId r = 0; r < 3; ++r) per_rel.push_back(g.edge_count(r));
        g.substitute_target(e.source, e.relation, e.target, t);
        CHECK(g == composed);
        for (RelationId r = 0; r < 3; ++r) CHECK(g.edge_count(r) == per_rel[r]);
    }
}

TEST_CASE("degree queries and id validation") {
    MultiRelGraph g(5, relations(1));
    for (NodeId v = 1; v <= 3; ++v) g.add_edge({0, 0, v});
    CHECK(g.out_degree(0, 0) == 3);
    CHECK(g.in_degree(0, 0) == 0);
    CHECK_THROWS_AS(g.has_edge(0, 0, 5), InvalidIdError);
    CHECK_THROWS_AS(g.out_degree(9, 0), InvalidIdError);
    CHECK_THROWS_AS(g.add_edge({0, 1, 1}), InvalidIdError);
}

TEST_CASE("index coherence under random operation sequences") {
    Rng rng(2024);
    for (int run = 0; run < 20; ++run) {
        MultiRelGraph g(12, relations(3));
        for (int step = 0; step < 300; ++step) {
            const Edge e{static_cast<NodeId>(uniform_index(rng, 12)), static_cast<RelationId>(uniform_index(rng, 3)),
                         static_cast<NodeId>(uniform_index(rng, 12))};
            const auto op = uniform_index(rng, 3);
            if (op == 0 && !g.has_edge(e)) {
                g.add_edge(e);
            } else if (op == 1 && g.has_edge(e)) {
                g.remove_edge(e);
            } else if (op == 2 && g.has_edge(e)) {
                const auto t = static_cast<NodeId>(uniform_index(rng, 12));
                if (!g.has_edge(e.source, e.relation, t)) {
                    const auto before = g.edge_count(e.relation);
                    g.substitute_target(e.source, e.relation, e.target, t);
                    CHECK(g.edge_count(e.relation) == before);
                }
            }
        }
        CHECK(g.indexes_coherent());
        std::size_t out_sum = 0, in_sum = 0;
        for (NodeId v = 0; v < 12; ++v)
            for (RelationId r = 0; r < 3; ++r) {
                out_sum += g.out_degree(v, r);
                in_sum += g.in_degree(v, r);
            }
        CHECK(out_sum == g.edge_count());
        CHECK(in_sum == g.edge_count());
    }
}

TEST_CASE("snapshot round-trips bit-exact") {
    Rng rng(5);
    auto g = testing_support::random_graph(rng, 10, 3, 0.2, true);
    RelationTable rel;
    rel.add("_hypernym", false);
    rel.add("_similar_to", true);
    rel.add("_has_part", false);
    MultiRelGraph named(10, rel);
    for (const auto& e : g.edges()) named.add_edge(e);
    Interner nodes;
    for (int i = 0; i < 10; ++i) nodes.intern("n" + std::to_string(i) + ".n.01");

    std::ostringstream first;
    write_graph(first, named, nodes);
    std::istringstream in(first.str());
    const auto snap = read_graph(in);
    CHECK(snap.graph == named);
    CHECK(snap.nodes == nodes);
    CHECK(snap.graph.relations().is_symmetric(1));
    std::ostringstream second;
    write_graph(second, snap.graph, snap.nodes);
    CHECK(first.str() == second.str());

    std::istringstream bad("not-a-graph\n");
    CHECK_THROWS_AS(read_graph(bad), FormatError);
}
