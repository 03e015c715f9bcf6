#ifndef M3GM_CONFIG_HPP_
#define M3GM_CONFIG_HPP_

#include "m3gm/association.hpp"
#include "m3gm/eval.hpp"
#include "m3gm/m3gm.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace m3gm {

/// Raised when an artifact was produced under a different configuration.
struct ArtifactMismatchError : ConfigError {
    using ConfigError::ConfigError;
};

/// Pipeline stages in dependency order. An artifact of one stage depends on
/// the settings of that stage and of every stage before it.
enum class Stage : std::uint8_t { Dataset, Association, Graph, Alpha, Eval };

/// Every knob of a pipeline run. Text form is flat "key = value" lines;
/// environment variables M3GM_<KEY> (upper case) override file values.
struct RunConfig {
    // Data and locations.
    std::string train;
    std::string dev;
    std::string test;
    std::string lemmas;
    std::string vectors;         // word vectors, averaged over synset lemmas
    std::string synset_vectors;  // precomputed synset vectors; takes precedence over `vectors`
    std::string symmetric;  // comma-separated relation names; empty selects the standard four
    std::string work_dir = "m3gm-run";

    // Association model.
    std::string model = "transe";
    std::size_t dim = 300;
    std::size_t assoc_negatives = 10;
    double assoc_lr = 0.01;
    std::size_t symmetric_every = 5;
    std::size_t patience = 5;
    std::size_t max_epochs = 100;

    // Graph model.
    double margin = 1.0;
    double lambda = 0.01;
    std::size_t m3gm_negatives = 10;
    std::size_t m3gm_epochs = 4;
    double m3gm_lr = 0.1;
    bool fine_tune = false;
    bool train_only = false;  // fit theta on train instead of train + dev
    std::size_t proposal_top = 500;

    // Re-ranking and evaluation.
    std::size_t k = 100;
    std::string fallback = "shuffle";

    std::size_t seed = 1;
    std::size_t threads = 1;

    using Field = std::variant<std::string*, std::size_t*, double*, bool*>;
    /// (key, field) pairs in serialization order.
    std::vector<std::pair<std::string_view, Field>> fields();
    std::vector<std::pair<std::string_view, Field>> fields() const {
        return const_cast<RunConfig*>(this)->fields();
    }

    /// Assigns one key from its text form; ConfigError on unknown keys or bad values.
    void set(std::string_view key, std::string_view value);
    std::string get(std::string_view key) const;

    void read(std::istream& is);
    void load(const std::string& path);
    /// Applies M3GM_* variables through `lookup` (getenv by default).
    void apply_env(const std::function<const char*(const char*)>& lookup = nullptr);
    void write(std::ostream& os) const;

    /// Stage a key belongs to; nullopt for keys that never change results
    /// (work_dir, threads).
    static std::optional<Stage> stage_of(std::string_view key);

    /// Fingerprint, as 16 hex digits, of every setting an artifact of `upto`
    /// depends on.
    std::string hash(Stage upto = Stage::Eval) const;

    void validate() const;

    AssocTrainConfig assoc_config() const;
    M3GMConfig m3gm_config() const;
    EvalOptions eval_options() const;
};

}  // namespace m3gm

#endif  // M3GM_CONFIG_HPP_
