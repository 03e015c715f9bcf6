#include "m3gm/embeddings.hpp"

#include "m3gm/io_util.hpp"
#include "m3gm/random.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace m3gm {

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

bool is_integer(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Parses "token v1 ... vd" records; calls fn(token, values, line_number).
template <typename Fn>
std::size_t read_vector_records(std::istream& is, std::optional<std::size_t> expected_dim, Fn&& fn) {
    std::string line;
    std::size_t line_no = 0;
    std::optional<std::size_t> dim = expected_dim;
    std::vector<double> values;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto fields = split_ws(line);
        if (fields.empty()) continue;
        if (line_no == 1 && fields.size() == 2 && is_integer(fields[0]) && is_integer(fields[1])) continue;
        const std::size_t d = fields.size() - 1;
        if (!dim) dim = d;
        if (d != *dim) {
            throw DimensionError("line " + std::to_string(line_no) + ": expected " + std::to_string(*dim) +
                                 " components, found " + std::to_string(d));
        }
        values.resize(d);
        for (std::size_t i = 0; i < d; ++i) values[i] = parse_double(fields[i + 1], line_no);
        fn(fields[0], std::span<const double>(values), line_no);
    }
    return dim.value_or(0);
}

}  // namespace

WordVectorTable WordVectorTable::read(std::istream& is) {
    std::optional<WordVectorTable> table;
    read_vector_records(is, std::nullopt, [&](const std::string& token, std::span<const double> v, std::size_t) {
        if (!table) table.emplace(v.size());
        table->add(token, v);
    });
    if (!table) throw FormatError("word vector file is empty");
    return std::move(*table);
}

WordVectorTable WordVectorTable::load(const std::string& path) {
    auto in = open_input(path);
    return read(in);
}

void WordVectorTable::add(std::string_view word, std::span<const double> values) {
    if (values.size() != dim_) throw DimensionError("word vector dimension mismatch for '" + std::string(word) + "'");
    auto [it, inserted] = index_.emplace(lowercase(word), data_.size() / std::max<std::size_t>(dim_, 1));
    if (!inserted) return;
    data_.insert(data_.end(), values.begin(), values.end());
}

const double* WordVectorTable::find(std::string_view word) const {
    auto it = index_.find(lowercase(word));
    if (it == index_.end()) return nullptr;
    return data_.data() + it->second * dim_;
}

std::optional<Vector> average_synset(std::span<const std::string> lemmas, const WordVectorTable& wv) {
    const auto d = static_cast<Eigen::Index>(wv.dim());
    Vector sum = Vector::Zero(d);
    std::size_t covered = 0;
    for (const auto& lemma : lemmas) {
        std::size_t start = 0;
        while (start <= lemma.size()) {
            auto end = lemma.find('_', start);
            if (end == std::string::npos) end = lemma.size();
            if (end > start) {
                if (const double* v = wv.find(std::string_view(lemma).substr(start, end - start))) {
                    sum += Eigen::Map<const Vector>(v, d);
                    ++covered;
                }
            }
            start = end + 1;
        }
    }
    if (covered == 0) return std::nullopt;
    return sum / static_cast<double>(covered);
}

std::vector<std::string> default_lemmas(std::string_view synset_name) {
    // Strip the ".pos.nn" suffix when present.
    auto last = synset_name.rfind('.');
    if (last != std::string_view::npos && last > 0) {
        auto pos = synset_name.rfind('.', last - 1);
        if (pos != std::string_view::npos && pos > 0) return {std::string(synset_name.substr(0, pos))};
    }
    return {std::string(synset_name)};
}

LemmaTable read_lemma_file(std::istream& is) {
    LemmaTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw FormatError("lemma file line " + std::to_string(line_no) + ": missing tab");
        auto lemmas = split_ws(line.substr(tab + 1));
        auto& entry = table[line.substr(0, tab)];
        entry.insert(entry.end(), lemmas.begin(), lemmas.end());
    }
    return table;
}

LemmaTable load_lemma_file(const std::string& path) {
    auto in = open_input(path);
    return read_lemma_file(in);
}

namespace {

void fill_random_row(Matrix& m, Eigen::Index row, Rng& rng) {
    const double half = 0.5 / static_cast<double>(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(row, j) = (2.0 * uniform_unit(rng) - 1.0) * half;
}

}  // namespace

SynsetEmbeddings build_synset_embeddings(const Interner& synsets, const LemmaTable* lemmas,
                                         const WordVectorTable& wv, std::size_t dim, std::uint64_t seed) {
    if (wv.dim() != dim) {
        throw DimensionError("word vectors have dimension " + std::to_string(wv.dim()) + ", expected " +
                             std::to_string(dim));
    }
    SynsetEmbeddings emb;
    const auto n = static_cast<Eigen::Index>(synsets.size());
    emb.vectors.resize(n, static_cast<Eigen::Index>(dim));
    emb.provenance.resize(synsets.size());
    emb.coverage.synsets = synsets.size();
    Rng rng(seed);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& name = synsets.name(static_cast<NodeId>(i));
        std::vector<std::string> names;
        if (lemmas) {
            if (auto it = lemmas->find(name); it != lemmas->end()) names = it->second;
        }
        if (names.empty()) names = default_lemmas(name);
        for (const auto& l : names) {
            std::size_t start = 0;
            while (start <= l.size()) {
                auto end = l.find('_', start);
                if (end == std::string::npos) end = l.size();
                if (end > start) {
                    ++emb.coverage.tokens;
                    if (wv.find(std::string_view(l).substr(start, end - start))) ++emb.coverage.covered_tokens;
                }
                start = end + 1;
            }
        }
        if (auto avg = average_synset(names, wv)) {
            emb.vectors.row(i) = avg->transpose();
            emb.provenance[static_cast<std::size_t>(i)] = Provenance::Averaged;
            ++emb.coverage.averaged;
        } else {
            fill_random_row(emb.vectors, i, rng);
            emb.provenance[static_cast<std::size_t>(i)] = Provenance::Random;
            ++emb.coverage.random;
        }
    }
    return emb;
}

SynsetEmbeddings random_synset_embeddings(std::size_t count, std::size_t dim, std::uint64_t seed) {
    SynsetEmbeddings emb;
    emb.vectors.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
    emb.provenance.assign(count, Provenance::Random);
    emb.coverage.synsets = count;
    emb.coverage.random = count;
    Rng rng(seed);
    for (Eigen::Index i = 0; i < emb.vectors.rows(); ++i) fill_random_row(emb.vectors, i, rng);
    return emb;
}

SynsetEmbeddings read_synset_vectors(std::istream& is, const Interner& synsets, std::size_t dim) {
    SynsetEmbeddings emb;
    emb.vectors = Matrix::Zero(static_cast<Eigen::Index>(synsets.size()), static_cast<Eigen::Index>(dim));
    emb.provenance.assign(synsets.size(), Provenance::Loaded);
    std::vector<bool> seen(synsets.size(), false);
    read_vector_records(is, dim, [&](const std::string& name, std::span<const double> v, std::size_t line_no) {
        const auto id = synsets.find(name);
        if (!id) throw FormatError("line " + std::to_string(line_no) + ": unknown synset '" + name + "'");
        if (seen[*id]) throw FormatError("line " + std::to_string(line_no) + ": synset '" + name + "' repeated");
        seen[*id] = true;
        emb.vectors.row(*id) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    });
    for (std::size_t i = 0; i < seen.size(); ++i) {
        if (!seen[i]) throw FormatError("synset vector file has no entry for '" + synsets.name(static_cast<NodeId>(i)) + "'");
    }
    emb.coverage.synsets = synsets.size();
    emb.coverage.loaded = synsets.size();
    return emb;
}

SynsetEmbeddings load_synset_vectors(const std::string& path, const Interner& synsets, std::size_t dim) {
    auto in = open_input(path);
    return read_synset_vectors(in, synsets, dim);
}

void write_synset_vectors(std::ostream& os, const Interner& synsets, const SynsetEmbeddings& emb) {
    if (emb.rows() != synsets.size()) throw DimensionError("embedding rows do not match synset table");
    for (std::size_t i = 0; i < emb.rows(); ++i) {
        os << synsets.name(static_cast<NodeId>(i));
        for (Eigen::Index j = 0; j < emb.vectors.cols(); ++j) {
            os << ' ' << format_double(emb.vectors(static_cast<Eigen::Index>(i), j));
        }
        os << '\n';
    }
}

void save_synset_vectors(const std::string& path, const Interner& synsets, const SynsetEmbeddings& emb) {
    auto out = open_output(path);
    write_synset_vectors(out, synsets, emb);
}

}  // namespace m3gm
