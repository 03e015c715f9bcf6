#ifndef M3GM_TESTS_TEST_SUPPORT_HPP_
#define M3GM_TESTS_TEST_SUPPORT_HPP_

#include "m3gm/graph.hpp"
#include "m3gm/random.hpp"
#include "motif_oracle.hpp"

#include <string>
#include <vector>

namespace testing_support {

inline m3gm::RelationTable relations(std::size_t n, std::size_t symmetric = 0) {
    m3gm::RelationTable t;
    for (std::size_t i = 0; i < n; ++i) t.add("r" + std::to_string(i), i < symmetric);
    return t;
}

// Erdos-Renyi style multigraph: each (u, r, v) with u != v present with
// probability `density`; optional self-loops sprinkled in.
inline m3gm::MultiRelGraph random_graph(m3gm::Rng& rng, std::size_t n, std::size_t nr, double density,
                                        bool loops = false) {
    m3gm::MultiRelGraph g(n, relations(nr));
    for (m3gm::NodeId u = 0; u < n; ++u)
        for (m3gm::NodeId v = 0; v < n; ++v)
            for (std::size_t r = 0; r < nr; ++r) {
                const bool allowed = u != v || loops;
                const double p = u == v ? density / 4 : density;
                if (allowed && m3gm::uniform_unit(rng) < p) g.add_edge({u, static_cast<m3gm::RelationId>(r), v});
            }
    return g;
}

inline std::vector<oracle::Triple> triples(const m3gm::MultiRelGraph& g) {
    std::vector<oracle::Triple> out;
    for (const auto& e : g.edges()) out.push_back({static_cast<int>(e.source), e.relation, static_cast<int>(e.target)});
    return out;
}

}  // namespace testing_support

#endif  // M3GM_TESTS_TEST_SUPPORT_HPP_
