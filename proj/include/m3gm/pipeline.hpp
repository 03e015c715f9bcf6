#ifndef M3GM_PIPELINE_HPP_
#define M3GM_PIPELINE_HPP_

#include "m3gm/association.hpp"
#include "m3gm/config.hpp"
#include "m3gm/dataset.hpp"
#include "m3gm/eval.hpp"
#include "m3gm/features.hpp"
#include "m3gm/m3gm.hpp"
#include "m3gm/rerank.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

namespace m3gm {

/// Which ranking system an evaluation measures.
enum class SystemKind : std::uint8_t { Rule, Association, Graph };
const char* to_string(SystemKind s);
SystemKind parse_system(std::string_view name);

/// File layout of a run directory.
struct Workspace {
    std::string root;

    std::string config() const { return root + "/config.txt"; }
    std::string dataset() const { return root + "/dataset"; }
    std::string dataset_manifest() const { return root + "/dataset/manifest"; }
    std::string association() const { return root + "/assoc.model"; }
    std::string tuned_association() const { return root + "/assoc.tuned.model"; }
    std::string weights() const { return root + "/theta.tsv"; }
    std::string alpha() const { return root + "/alpha.tsv"; }
    std::string rerank() const { return root + "/rerank.tsv"; }
    std::string report(SystemKind s) const { return root + "/report." + to_string(s) + ".txt"; }
};

struct PipelineResult {
    EvalReport rule;
    EvalReport association;
    EvalReport graph;
};

/// Stage runner over one run directory.
///
/// Every stage writes its artifact into the workspace stamped with the
/// config hash of that stage, and reads upstream artifacts lazily, refusing
/// any whose hash differs from the current configuration. Errors leave a
/// stage prefixed with its name.
class Pipeline {
public:
    Pipeline(RunConfig cfg, std::ostream& log);
    ~Pipeline();

    const RunConfig& config() const { return cfg_; }
    const Workspace& workspace() const { return ws_; }

    void ingest();
    void train_association();
    void train_graph();
    void tune_alpha();
    EvalReport evaluate(SystemKind system, bool per_relation = false);
    /// Reranked top-K list of every test instance, one line each.
    void rerank(std::ostream& out, const std::string& alpha_path = {});
    /// Feature census of the training graph; zero-valued features only with `all`.
    void count_motifs(std::ostream& out, bool all);
    void inspect_weights(std::ostream& out, std::size_t top);

    /// ingest, train-assoc, train-m3gm, tune-alpha, then eval of all three systems.
    PipelineResult run(bool per_relation = false);

    const DatasetBundle& bundle();
    const AssociationModel& association();
    const GraphWeights& weights();
    const AlphaTable& alpha();

private:
    struct Cache;

    const FeatureRegistry& registry();
    const FilterSet& filter();
    const AssociationModel& ranking_association();
    void save_config() const;
    template <typename Fn>
    auto stage(const char* name, Fn&& fn);

    RunConfig cfg_;
    Workspace ws_;
    std::ostream& log_;
    std::unique_ptr<Cache> cache_;
};

/// Exit status for an exception escaping a stage: 2 configuration,
/// 3 data or format, 4 artifact mismatch, 5 training, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace m3gm

#endif  // M3GM_PIPELINE_HPP_
