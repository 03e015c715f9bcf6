#include "m3gm/rerank.hpp"

#include "m3gm/io_util.hpp"
#include "m3gm/parallel.hpp"

#include <algorithm>
#include <istream>
#include <optional>
#include <ostream>

namespace m3gm {

std::vector<Instance> make_instances(std::span<const Edge> edges) {
    std::vector<Instance> out;
    out.reserve(2 * edges.size());
    for (const auto& e : edges) {
        out.push_back({e, Direction::PredictTarget});
        out.push_back({e, Direction::PredictSource});
    }
    return out;
}

void write_alpha(std::ostream& os, const AlphaTable& table, const RelationTable& relations) {
    if (table.alpha.size() != relations.size()) throw DimensionError("alpha table does not match the relation table");
    for (std::size_t r = 0; r < relations.size(); ++r) {
        os << relations.names[r] << '\t' << format_double(table.alpha[r]) << '\n';
    }
}

AlphaTable read_alpha(std::istream& is, const RelationTable& relations) {
    AlphaTable table(relations.size());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.starts_with('#')) continue;
        const auto f = split(line, '\t');
        if (f.size() != 2) throw FormatError("alpha line " + std::to_string(line_no) + ": expected 2 fields");
        const auto r = relations.find(f[0]);
        if (!r) throw FormatError("alpha line " + std::to_string(line_no) + ": unknown relation '" + f[0] + "'");
        const double a = parse_double(f[1], line_no);
        if (!(a >= 0.0 && a <= 1.0)) throw FormatError("alpha line " + std::to_string(line_no) + ": value outside [0, 1]");
        table.alpha[*r] = a;
    }
    return table;
}

double graph_delta_score(const RerankContext& ctx, const Edge& e) {
    if (ctx.graph->has_edge(e)) return 0.0;
    return score_delta(*ctx.theta, delta_insert(*ctx.graph, *ctx.registry, e, *ctx.features));
}

RerankResult rerank(std::span<const Candidate> candidates, const Instance& inst, const RerankContext& ctx,
                    double alpha) {
    RerankResult out;
    out.ranked.reserve(candidates.size());
    for (const auto& c : candidates) {
        const Edge e = inst.completed(c.node);
        double graph = 0.0;
        if (ctx.graph->has_edge(e)) {
            ++out.skipped;
        } else {
            graph = graph_delta_score(ctx, e);
        }
        out.ranked.push_back({c.node, c.score, graph, combine_scores(alpha, graph, c.score)});
    }
    std::stable_sort(out.ranked.begin(), out.ranked.end(),
                     [](const RerankedCandidate& a, const RerankedCandidate& b) { return a.combined > b.combined; });
    return out;
}

namespace {

struct TuningRow {
    std::vector<double> graph;
    std::vector<double> assoc;
    std::optional<std::size_t> gold_pos;  // index in the association top-K
    std::size_t assoc_rank = 0;
};

std::size_t reranked_rank(const TuningRow& row, double alpha) {
    if (!row.gold_pos) return row.assoc_rank;
    const auto g = *row.gold_pos;
    const double cg = combine_scores(alpha, row.graph[g], row.assoc[g]);
    std::size_t rank = 1;
    for (std::size_t j = 0; j < row.graph.size(); ++j) {
        if (j == g) continue;
        const double cj = combine_scores(alpha, row.graph[j], row.assoc[j]);
        if (cj > cg || (cj == cg && j < g)) ++rank;
    }
    return rank;
}

}  // namespace

AlphaTable tune_alpha(std::span<const Instance> dev, const AssociationModel& assoc, const FilterSet& filter,
                      const RerankContext& ctx, std::size_t k, std::size_t threads) {
    const auto& rel = assoc.relations();
    AlphaTable table(rel.size());

    std::vector<TuningRow> rows(dev.size());
    parallel_for(dev.size(), threads, [&](std::size_t i) {
        const auto& inst = dev[i];
        const RelationId r = inst.edge.relation;
        if (rel.is_symmetric(r)) return;
        const Vector scores = assoc.score_all(inst.query(), r, inst.direction);
        const auto top = top_candidates(scores, inst.query(), r, inst.direction, filter, inst.gold(), k);
        auto& row = rows[i];
        row.assoc_rank = filtered_rank(scores, inst.query(), r, inst.direction, filter, inst.gold());
        for (std::size_t j = 0; j < top.size(); ++j) {
            row.assoc.push_back(top[j].score);
            row.graph.push_back(graph_delta_score(ctx, inst.completed(top[j].node)));
            if (top[j].node == inst.gold()) row.gold_pos = j;
        }
    });

    for (std::size_t r = 0; r < rel.size(); ++r) {
        if (rel.is_symmetric(static_cast<RelationId>(r))) continue;
        std::vector<const TuningRow*> mine;
        for (std::size_t i = 0; i < dev.size(); ++i) {
            if (dev[i].edge.relation == r) mine.push_back(&rows[i]);
        }
        if (mine.empty()) {
            table.warnings.push_back("relation " + rel.names[r] + " has no dev instances; alpha set to 0");
            continue;
        }
        double best = -1.0;
        for (int step = 0; step <= 100; ++step) {
            const double alpha = step / 100.0;
            double sum = 0.0;
            for (const auto* row : mine) sum += 1.0 / static_cast<double>(reranked_rank(*row, alpha));
            if (sum > best) {
                best = sum;
                table.alpha[r] = alpha;
            }
        }
    }
    return table;
}

}  // namespace m3gm
