#ifndef M3GM_DATASET_HPP_
#define M3GM_DATASET_HPP_

#include "m3gm/graph.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace m3gm {

/// Relations flagged symmetric when the configuration names none.
const std::vector<std::string>& default_symmetric_relations();

/// Whether `relation` (with or without a leading underscore) is in `names`.
bool names_relation(const std::vector<std::string>& names, std::string_view relation);

/// Comma-separated list to names; empty input yields the defaults.
std::vector<std::string> parse_symmetric_list(std::string_view list);

struct IngestStats {
    std::size_t train_lines = 0;
    std::size_t dev_lines = 0;
    std::size_t test_lines = 0;
    std::size_t train_self_loops = 0;       // kept in the graph
    std::size_t eval_self_loops_dropped = 0;
    std::size_t unseen_eval_entities = 0;   // dev/test entities absent from train
};

/// A knowledge-base split with dense ids shared across splits.
///
/// Relations are numbered by sorted name over the train split. Nodes are
/// numbered by first appearance, train first, then dev, then test.
struct DatasetBundle {
    Interner nodes;
    MultiRelGraph train;
    std::vector<Edge> dev;
    std::vector<Edge> test;
    IngestStats stats;

    const RelationTable& relations() const { return train.relations(); }
    /// Train plus dev edges, the base graph of the final model.
    MultiRelGraph train_and_dev() const;
};

/// A named input stream; the name prefixes error messages.
struct NamedInput {
    std::string name;
    std::istream* stream;
};

/// Reads tab-separated "source<TAB>relation<TAB>target" triples.
///
/// Blank lines are skipped. Malformed lines, relations absent from train,
/// and triples repeated within or across splits raise FormatError naming
/// the file and line. Self-loops in dev or test are dropped.
DatasetBundle ingest(NamedInput train, NamedInput dev, NamedInput test,
                     const std::vector<std::string>& symmetric = default_symmetric_relations());
DatasetBundle ingest_files(const std::string& train, const std::string& dev, const std::string& test,
                           const std::vector<std::string>& symmetric = default_symmetric_relations());

/// Triples by name, one per line, in the ingest input format.
void write_triples(std::ostream& os, std::span<const Edge> edges, const Interner& nodes,
                   const RelationTable& relations);

/// Bundle directory: train.graph (graph snapshot) plus dev.tsv and test.tsv.
void save_bundle(const std::string& dir, const DatasetBundle& bundle);
DatasetBundle load_bundle(const std::string& dir);

}  // namespace m3gm

#endif  // M3GM_DATASET_HPP_
