#include "m3gm/config.hpp"

#include "m3gm/io_util.hpp"
#include "m3gm/random.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

namespace m3gm {

std::vector<std::pair<std::string_view, RunConfig::Field>> RunConfig::fields() {
    return {
        {"train", &train},
        {"dev", &dev},
        {"test", &test},
        {"lemmas", &lemmas},
        {"vectors", &vectors},
        {"synset_vectors", &synset_vectors},
        {"symmetric", &symmetric},
        {"work_dir", &work_dir},
        {"model", &model},
        {"dim", &dim},
        {"assoc_negatives", &assoc_negatives},
        {"assoc_lr", &assoc_lr},
        {"symmetric_every", &symmetric_every},
        {"patience", &patience},
        {"max_epochs", &max_epochs},
        {"margin", &margin},
        {"lambda", &lambda},
        {"m3gm_negatives", &m3gm_negatives},
        {"m3gm_epochs", &m3gm_epochs},
        {"m3gm_lr", &m3gm_lr},
        {"fine_tune", &fine_tune},
        {"train_only", &train_only},
        {"proposal_top", &proposal_top},
        {"k", &k},
        {"fallback", &fallback},
        {"seed", &seed},
        {"threads", &threads},
    };
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

template <typename T>
T parse_unsigned(std::string_view key, std::string_view value) {
    T v{};
    auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
        throw ConfigError("config key '" + std::string(key) + "': expected a non-negative integer, got '" +
                          std::string(value) + "'");
    }
    return v;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
    value = trim(value);
    for (auto& [name, field] : fields()) {
        if (name != key) continue;
        std::visit(
            [&](auto* p) {
                using T = std::remove_pointer_t<decltype(p)>;
                if constexpr (std::is_same_v<T, std::string>) {
                    *p = std::string(value);
                } else if constexpr (std::is_same_v<T, bool>) {
                    if (value == "true" || value == "1" || value == "yes") {
                        *p = true;
                    } else if (value == "false" || value == "0" || value == "no") {
                        *p = false;
                    } else {
                        throw ConfigError("config key '" + std::string(key) + "': expected true or false");
                    }
                } else if constexpr (std::is_same_v<T, double>) {
                    try {
                        *p = parse_double(value);
                    } catch (const FormatError&) {
                        throw ConfigError("config key '" + std::string(key) + "': expected a number, got '" +
                                          std::string(value) + "'");
                    }
                } else {
                    *p = parse_unsigned<T>(key, value);
                }
            },
            field);
        return;
    }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string RunConfig::get(std::string_view key) const {
    for (const auto& [name, field] : fields()) {
        if (name != key) continue;
        return std::visit(
            [](auto* p) -> std::string {
                using T = std::remove_pointer_t<decltype(p)>;
                if constexpr (std::is_same_v<T, std::string>) {
                    return *p;
                } else if constexpr (std::is_same_v<T, bool>) {
                    return *p ? "true" : "false";
                } else if constexpr (std::is_same_v<T, double>) {
                    return format_double(*p);
                } else {
                    return std::to_string(*p);
                }
            },
            field);
    }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void RunConfig::read(std::istream& is) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto body = trim(std::string_view(line).substr(0, line.find('#')));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        set(trim(body.substr(0, eq)), body.substr(eq + 1));
    }
}

void RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    read(in);
}

void RunConfig::apply_env(const std::function<const char*(const char*)>& lookup) {
    for (const auto& [name, field] : fields()) {
        std::string var = "M3GM_";
        for (char c : name) var += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        const char* value = lookup ? lookup(var.c_str()) : std::getenv(var.c_str());
        if (value) set(name, value);
    }
}

void RunConfig::write(std::ostream& os) const {
    for (const auto& [name, field] : fields()) os << name << " = " << get(name) << '\n';
}

std::optional<Stage> RunConfig::stage_of(std::string_view key) {
    static const std::unordered_map<std::string_view, Stage> stages = {
        {"train", Stage::Dataset},
        {"dev", Stage::Dataset},
        {"test", Stage::Dataset},
        {"symmetric", Stage::Dataset},
        {"lemmas", Stage::Association},
        {"vectors", Stage::Association},
        {"synset_vectors", Stage::Association},
        {"model", Stage::Association},
        {"dim", Stage::Association},
        {"assoc_negatives", Stage::Association},
        {"assoc_lr", Stage::Association},
        {"symmetric_every", Stage::Association},
        {"patience", Stage::Association},
        {"max_epochs", Stage::Association},
        {"seed", Stage::Association},
        {"margin", Stage::Graph},
        {"lambda", Stage::Graph},
        {"m3gm_negatives", Stage::Graph},
        {"m3gm_epochs", Stage::Graph},
        {"m3gm_lr", Stage::Graph},
        {"fine_tune", Stage::Graph},
        {"train_only", Stage::Graph},
        {"proposal_top", Stage::Graph},
        {"k", Stage::Alpha},
        {"fallback", Stage::Eval},
    };
    const auto it = stages.find(key);
    if (it == stages.end()) return std::nullopt;
    return it->second;
}

std::string RunConfig::hash(Stage upto) const {
    std::uint64_t h = fnv1a("m3gm-config-1");
    for (const auto& [name, field] : fields()) {
        const auto stage = stage_of(name);
        if (!stage || *stage > upto) continue;
        h = fnv1a(name, h);
        h = fnv1a("=", h);
        h = fnv1a(get(name), h);
        h = fnv1a("\n", h);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void RunConfig::validate() const {
    parse_variant(model);
    parse_fallback(fallback);
    if (dim == 0) throw ConfigError("dim must be positive");
    if (k == 0) throw ConfigError("k must be positive");
    if (threads == 0) throw ConfigError("threads must be positive");
    if (!(assoc_lr > 0.0)) throw ConfigError("assoc_lr must be positive");
    if (assoc_negatives == 0) throw ConfigError("assoc_negatives must be positive");
    if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
    if (patience == 0) throw ConfigError("patience must be positive");
    m3gm_config().validate();
}

AssocTrainConfig RunConfig::assoc_config() const {
    AssocTrainConfig c;
    c.variant = parse_variant(model);
    c.negatives = assoc_negatives;
    c.learning_rate = assoc_lr;
    c.symmetric_every = symmetric_every;
    c.patience = patience;
    c.max_epochs = max_epochs;
    c.seed = stage_seed(seed, "train-assoc");
    return c;
}

M3GMConfig RunConfig::m3gm_config() const {
    M3GMConfig c;
    c.margin = margin;
    c.lambda = lambda;
    c.negatives = m3gm_negatives;
    c.epochs = m3gm_epochs;
    c.learning_rate = m3gm_lr;
    c.fine_tune = fine_tune;
    c.proposal_top = proposal_top;
    c.seed = stage_seed(seed, "train-m3gm");
    return c;
}

EvalOptions RunConfig::eval_options() const {
    EvalOptions o;
    o.fallback = parse_fallback(fallback);
    o.seed = stage_seed(seed, "eval");
    o.threads = threads;
    return o;
}

}  // namespace m3gm
