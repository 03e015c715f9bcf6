#ifndef M3GM_EMBEDDINGS_HPP_
#define M3GM_EMBEDDINGS_HPP_

#include "m3gm/graph.hpp"
#include "m3gm/types.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace m3gm {

std::string lowercase(std::string_view s);

/// Pretrained word vectors keyed by lowercased wordform.
class WordVectorTable {
public:
    explicit WordVectorTable(std::size_t dim) : dim_(dim) {}

    /// Text format, one entry per line: "token v1 ... vd". A leading
    /// "<count> <dim>" header line is skipped. On case collisions the first
    /// entry wins.
    static WordVectorTable read(std::istream& is);
    static WordVectorTable load(const std::string& path);

    void add(std::string_view word, std::span<const double> values);
    /// Case-insensitive lookup.
    const double* find(std::string_view word) const;

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return index_.size(); }

private:
    std::size_t dim_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<double> data_;
};

/// Mean of the vectors of all wordform tokens (lemmas split on '_') that
/// have a vector, counted with multiplicity. nullopt if no token is covered.
std::optional<Vector> average_synset(std::span<const std::string> lemmas, const WordVectorTable& wv);

/// Lemmas of a synset name without a lemma inventory: "find_out.v.01" -> {"find_out"}.
std::vector<std::string> default_lemmas(std::string_view synset_name);

using LemmaTable = std::unordered_map<std::string, std::vector<std::string>>;
/// "synset<TAB>lemma lemma ..." per line.
LemmaTable read_lemma_file(std::istream& is);
LemmaTable load_lemma_file(const std::string& path);

enum class Provenance : std::uint8_t { Averaged, Random, Loaded };

struct CoverageReport {
    std::size_t synsets = 0;
    std::size_t averaged = 0;
    std::size_t random = 0;
    std::size_t loaded = 0;
    std::size_t tokens = 0;
    std::size_t covered_tokens = 0;

    double percent(std::size_t part) const { return synsets ? 100.0 * static_cast<double>(part) / static_cast<double>(synsets) : 0.0; }
};

struct SynsetEmbeddings {
    Matrix vectors;  // |V| x d, row i belongs to node i
    std::vector<Provenance> provenance;
    CoverageReport coverage;

    std::size_t dim() const { return static_cast<std::size_t>(vectors.cols()); }
    std::size_t rows() const { return static_cast<std::size_t>(vectors.rows()); }
};

/// Averaged vectors where available, uniform [-0.5/d, 0.5/d] otherwise.
/// `lemmas` may be null, in which case default_lemmas is used per synset.
SynsetEmbeddings build_synset_embeddings(const Interner& synsets, const LemmaTable* lemmas,
                                         const WordVectorTable& wv, std::size_t dim, std::uint64_t seed);

SynsetEmbeddings random_synset_embeddings(std::size_t count, std::size_t dim, std::uint64_t seed);

/// Synset-vector file: same layout as word vectors with synset names as
/// tokens. Every synset in `synsets` must appear exactly once.
SynsetEmbeddings read_synset_vectors(std::istream& is, const Interner& synsets, std::size_t dim);
SynsetEmbeddings load_synset_vectors(const std::string& path, const Interner& synsets, std::size_t dim);
void write_synset_vectors(std::ostream& os, const Interner& synsets, const SynsetEmbeddings& emb);
void save_synset_vectors(const std::string& path, const Interner& synsets, const SynsetEmbeddings& emb);

}  // namespace m3gm

#endif  // M3GM_EMBEDDINGS_HPP_
