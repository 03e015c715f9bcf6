#include "m3gm/eval.hpp"

#include "m3gm/io_util.hpp"
#include "m3gm/parallel.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

namespace m3gm {

const char* to_string(Fallback f) {
    return f == Fallback::Shuffle ? "shuffle" : "expected-rank";
}

Fallback parse_fallback(std::string_view name) {
    if (name == "shuffle") return Fallback::Shuffle;
    if (name == "expected-rank") return Fallback::ExpectedRank;
    throw ConfigError("unknown fallback '" + std::string(name) + "' (expected shuffle or expected-rank)");
}

bool rule_fires(const MultiRelGraph& train, const Instance& inst) {
    const auto& e = inst.edge;
    return train.has_edge(e.target, e.relation, e.source);
}

double rule_rank(const MultiRelGraph& train, const Instance& inst, const FilterSet& filter, Fallback fallback,
                 std::uint64_t instance_seed) {
    if (rule_fires(train, inst)) return 1.0;
    const auto pool = filter.pool_size(inst.query(), inst.edge.relation, inst.direction, inst.gold());
    if (fallback == Fallback::ExpectedRank) return (static_cast<double>(pool) + 1.0) / 2.0;
    Rng rng(instance_seed);
    return static_cast<double>(uniform_index(rng, pool) + 1);
}

Metrics summarize(std::span<const double> ranks) {
    Metrics m;
    m.count = ranks.size();
    if (ranks.empty()) return m;
    double sum = 0.0, recip = 0.0;
    std::size_t h10 = 0, h1 = 0;
    for (double r : ranks) {
        sum += r;
        recip += 1.0 / r;
        h10 += r <= 10.0;
        h1 += r <= 1.0;
    }
    const auto n = static_cast<double>(ranks.size());
    m.mr = sum / n;
    m.mrr = 100.0 * recip / n;
    m.h10 = 100.0 * static_cast<double>(h10) / n;
    m.h1 = 100.0 * static_cast<double>(h1) / n;
    return m;
}

namespace {

struct Outcome {
    double rank = 0.0;
    bool by_rule = false;
    bool fired = false;
    std::size_t skipped = 0;
};

Outcome rank_instance(const EvalSystem& system, const Instance& inst, const MultiRelGraph& train,
                      const FilterSet& filter, const RelationTable& relations, const EvalOptions& options,
                      std::uint64_t instance_seed) {
    const RelationId r = inst.edge.relation;
    if (inst.gold() == inst.query()) {
        throw GraphError("instance " + std::to_string(inst.edge.source) + " " + relations.names.at(r) +
                         " is a self-loop; its gold entity is always filtered");
    }
    Outcome out;
    if (relations.is_symmetric(r) || !system.assoc) {
        out.by_rule = true;
        out.fired = rule_fires(train, inst);
        out.rank = rule_rank(train, inst, filter, options.fallback, instance_seed);
        return out;
    }
    const Vector scores = system.assoc->score_all(inst.query(), r, inst.direction);
    const auto assoc_rank = filtered_rank(scores, inst.query(), r, inst.direction, filter, inst.gold());
    out.rank = static_cast<double>(assoc_rank);
    if (!system.rerank || !system.alpha || assoc_rank > system.k) return out;

    const auto top = top_candidates(scores, inst.query(), r, inst.direction, filter, inst.gold(), system.k);
    const auto res = rerank(top, inst, *system.rerank, (*system.alpha)[r]);
    out.skipped = res.skipped;
    const auto it = std::find_if(res.ranked.begin(), res.ranked.end(),
                                 [&](const RerankedCandidate& c) { return c.node == inst.gold(); });
    out.rank = static_cast<double>(it - res.ranked.begin() + 1);
    return out;
}

}  // namespace

EvalReport evaluate(const EvalSystem& system, std::span<const Instance> instances, const MultiRelGraph& train,
                    const FilterSet& filter, const RelationTable& relations, const EvalOptions& options) {
    std::vector<Outcome> outcomes(instances.size());
    parallel_for(instances.size(), options.threads, [&](std::size_t i) {
        outcomes[i] = rank_instance(system, instances[i], train, filter, relations, options, mix_seed(options.seed, i));
    });

    EvalReport report;
    std::vector<std::vector<double>> by_relation(relations.size());
    report.ranks.reserve(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& o = outcomes[i];
        report.ranks.push_back(o.rank);
        by_relation[instances[i].edge.relation].push_back(o.rank);
        report.rule_instances += o.by_rule;
        report.rule_fired += o.fired;
        report.rerank_skipped += o.skipped;
    }
    report.overall = summarize(report.ranks);
    for (std::size_t r = 0; r < relations.size(); ++r) {
        if (!by_relation[r].empty()) report.per_relation[relations.names[r]] = summarize(by_relation[r]);
    }
    return report;
}

namespace {

void table_row(std::ostream& os, const std::string& name, const Metrics& m) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-32s %8zu %10.2f %7.2f %7.2f %7.2f\n", name.c_str(), m.count, m.mr, m.mrr, m.h10,
                  m.h1);
    os << buf;
}

void metric_lines(std::ostream& os, const std::string& prefix, const Metrics& m) {
    os << prefix << "instances\t" << m.count << '\n';
    os << prefix << "MR\t" << format_double(m.mr) << '\n';
    os << prefix << "MRR\t" << format_double(m.mrr) << '\n';
    os << prefix << "H@10\t" << format_double(m.h10) << '\n';
    os << prefix << "H@1\t" << format_double(m.h1) << '\n';
}

}  // namespace

void write_report(std::ostream& os, const EvalReport& report, bool per_relation) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-32s %8s %10s %7s %7s %7s\n", "relation", "count", "MR", "MRR", "H@10", "H@1");
    os << buf;
    if (per_relation) {
        for (const auto& [name, m] : report.per_relation) table_row(os, name, m);
    }
    table_row(os, "all", report.overall);
    os << '\n';
    metric_lines(os, "", report.overall);
    os << "rule_instances\t" << report.rule_instances << '\n';
    os << "rule_fired\t" << report.rule_fired << '\n';
    if (per_relation) {
        for (const auto& [name, m] : report.per_relation) metric_lines(os, name + ".", m);
    }
}

}  // namespace m3gm
