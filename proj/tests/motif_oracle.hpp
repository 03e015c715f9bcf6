#ifndef M3GM_TESTS_MOTIF_ORACLE_HPP_
#define M3GM_TESTS_MOTIF_ORACLE_HPP_

// Brute-force motif census straight from the feature definitions, over a
// dense adjacency table. Shares nothing with the library's counting code;
// only the template names are common so results can be matched by key.

#include "m3gm/features.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <vector>

namespace oracle {

struct Triple {
    int s, r, t;
};

inline std::string key(const std::string& templ, std::vector<int> rels) {
    std::string k = templ + "|";
    for (std::size_t i = 0; i < rels.size(); ++i) k += (i ? "," : "") + std::to_string(rels[i]);
    return k;
}

inline std::vector<int> min_rotation(const std::vector<int>& r) {
    std::vector<int> best = r;
    for (std::size_t s = 1; s < r.size(); ++s) {
        std::vector<int> rot(r.begin() + static_cast<long>(s), r.end());
        rot.insert(rot.end(), r.begin(), r.begin() + static_cast<long>(s));
        best = std::min(best, rot);
    }
    return best;
}

// Every canonical relation tuple of each template, listed independently.
inline std::map<std::string, double> zero_census(int R) {
    std::map<std::string, double> out;
    for (int a = 0; a < R; ++a) {
        out[key("edge_count", {a})] = 0;
        for (const char* t : {"out_exactly1", "in_exactly1", "out_at_least1", "in_at_least1"}) out[key(t, {a})] = 0;
        for (int b = 0; b < R; ++b) {
            out[key("path2", {a, b})] = 0;
            if (a <= b) {
                out[key("cycle2", {a, b})] = 0;
                for (const char* t : {"out_exactly2", "in_exactly2", "out_at_least2", "in_at_least2"})
                    out[key(t, {a, b})] = 0;
            }
            for (int c = 0; c < R; ++c) {
                out[key("transitivity", {a, b, c})] = 0;
                out[key("cycle3", min_rotation({a, b, c}))] = 0;
                if (a <= b && b <= c) {
                    for (const char* t : {"out_exactly3", "in_exactly3", "out_at_least3", "in_at_least3"})
                        out[key(t, {a, b, c})] = 0;
                }
            }
        }
    }
    return out;
}

inline std::map<std::string, double> census(int n, int R, const std::vector<Triple>& edges) {
    std::vector<std::vector<unsigned>> mask(static_cast<std::size_t>(n), std::vector<unsigned>(static_cast<std::size_t>(n), 0));
    for (const auto& e : edges) {
        if (e.s != e.t) mask[e.s][e.t] |= 1U << e.r;
    }
    auto has = [&](int u, int r, int v) { return (mask[u][v] >> r) & 1U; };
    auto out = zero_census(R);

    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v)
            for (int r = 0; r < R; ++r)
                if (has(u, r, v)) out[key("edge_count", {r})] += 1;

    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v)
            for (int a = 0; a < R; ++a)
                for (int b = 0; b < R; ++b)
                    if (has(u, a, v) && has(v, b, u)) out[key("cycle2", {std::min(a, b), std::max(a, b)})] += 1;

    // Each directed 3-cycle is listed once, starting from its smallest node.
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v)
            for (int w = u + 1; w < n; ++w) {
                if (w == v || !mask[u][v] || !mask[v][w] || !mask[w][u]) continue;
                for (int a = 0; a < R; ++a)
                    for (int b = 0; b < R; ++b)
                        for (int c = 0; c < R; ++c)
                            if (has(u, a, v) && has(v, b, w) && has(w, c, u))
                                out[key("cycle3", min_rotation({a, b, c}))] += 1;
            }

    for (int x = 0; x < n; ++x) {
        for (int side = 0; side < 2; ++side) {
            std::vector<int> prof(static_cast<std::size_t>(R), 0);
            for (int y = 0; y < n; ++y)
                for (int r = 0; r < R; ++r) prof[r] += side == 0 ? has(x, r, y) : has(y, r, x);
            int total = 0;
            for (int p : prof) total += p;
            const std::string pre = side == 0 ? "out_" : "in_";
            std::vector<std::vector<int>> multisets;
            for (int a = 0; a < R; ++a) {
                multisets.push_back({a});
                for (int b = a; b < R; ++b) {
                    multisets.push_back({a, b});
                    for (int c = b; c < R; ++c) multisets.push_back({a, b, c});
                }
            }
            for (const auto& m : multisets) {
                std::vector<int> need(static_cast<std::size_t>(R), 0);
                for (int r : m) need[r] += 1;
                bool dominates = true;
                for (int r = 0; r < R; ++r) dominates &= prof[r] >= need[r];
                const auto k = std::to_string(m.size());
                if (dominates) out[key(pre + "at_least" + k, m)] += 1;
                if (dominates && total == static_cast<int>(m.size())) out[key(pre + "exactly" + k, m)] += 1;
            }
        }
    }

    std::map<std::string, double> closed;
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
            if (!mask[u][v]) continue;
            for (int w = 0; w < n; ++w) {
                if (w == u || !mask[v][w]) continue;
                for (int a = 0; a < R; ++a)
                    for (int b = 0; b < R; ++b) {
                        if (!has(u, a, v) || !has(v, b, w)) continue;
                        out[key("path2", {a, b})] += 1;
                        for (int c = 0; c < R; ++c)
                            if (has(u, c, w)) closed[key("transitivity", {a, b, c})] += 1;
                    }
            }
        }
    for (int a = 0; a < R; ++a)
        for (int b = 0; b < R; ++b)
            for (int c = 0; c < R; ++c) {
                const double paths = out[key("path2", {a, b})];
                const auto k = key("transitivity", {a, b, c});
                out[k] = paths == 0 ? 0.0 : closed[k] / paths;
            }
    return out;
}

inline std::string library_key(const m3gm::FeatureRegistry& reg, std::size_t i) {
    const auto& f = reg.feature(i);
    std::vector<int> rels;
    for (std::size_t j = 0; j < f.arity(); ++j) rels.push_back(f.relations[j]);
    return key(m3gm::template_name(f.kind), rels);
}

}  // namespace oracle

#endif  // M3GM_TESTS_MOTIF_ORACLE_HPP_
