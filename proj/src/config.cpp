#include "brsm/config.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "brsm/data.hpp"

namespace brsm {

namespace {

enum class FieldType { U64, Long, Int, Double, Bool, String };

struct FieldDef {
    const char* section;
    const char* key;
    FieldType type;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

std::string format_double(double v) {
    // Shortest representation that round-trips a double.
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double parsed = std::strtod(buf, nullptr);
    for (int prec = 1; prec < 17; ++prec) {
        char shorter[64];
        std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
        if (std::strtod(shorter, nullptr) == parsed) return shorter;
    }
    return buf;
}

double parse_double(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
    }
    if (pos != value.size())
        throw ConfigError("config: key '" + key + "' has trailing characters in '" + value + "'");
    return v;
}

long parse_long(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + value + "'");
    }
    if (pos != value.size())
        throw ConfigError("config: key '" + key + "' has trailing characters in '" + value + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError("config: key '" + key + "' expects true or false, got '" + value + "'");
}

#define FIELD_U64(section, key, member)                                                  \
    FieldDef{section, key, FieldType::U64,                                               \
             [](const RunConfig& c) { return std::to_string(c.member); },                \
             [](RunConfig& c, const std::string& v) {                                    \
                 c.member = static_cast<std::uint64_t>(std::stoull(v));                  \
             }}

#define FIELD_LONG(section, key, member)                                                 \
    FieldDef{section, key, FieldType::Long,                                              \
             [](const RunConfig& c) { return std::to_string(c.member); },                \
             [](RunConfig& c, const std::string& v) { c.member = parse_long(key, v); }}

#define FIELD_INT(section, key, member)                                                  \
    FieldDef{section, key, FieldType::Int,                                               \
             [](const RunConfig& c) { return std::to_string(c.member); },                \
             [](RunConfig& c, const std::string& v) {                                    \
                 c.member = static_cast<int>(parse_long(key, v));                        \
             }}

#define FIELD_DOUBLE(section, key, member)                                               \
    FieldDef{section, key, FieldType::Double,                                            \
             [](const RunConfig& c) { return format_double(c.member); },                 \
             [](RunConfig& c, const std::string& v) { c.member = parse_double(key, v); }}

#define FIELD_BOOL(section, key, member)                                                 \
    FieldDef{section, key, FieldType::Bool,                                              \
             [](const RunConfig& c) { return c.member ? "true" : "false"; },             \
             [](RunConfig& c, const std::string& v) { c.member = parse_bool(key, v); }}

#define FIELD_STRING(section, key, member)                                               \
    FieldDef{section, key, FieldType::String,                                            \
             [](const RunConfig& c) { return c.member; },                                \
             [](RunConfig& c, const std::string& v) { c.member = v; }}

const std::vector<FieldDef>& registry() {
    static const std::vector<FieldDef> fields = {
        FIELD_U64("run", "seed", seed),
        FIELD_LONG("run", "steps", steps),
        FIELD_INT("run", "batch_size", batch_size),
        FIELD_STRING("run", "run_id", run_id),
        FIELD_STRING("run", "out_dir", out_dir),
        FIELD_LONG("run", "eval_every", eval_every),
        FIELD_INT("run", "eval_steps", eval_steps),
        FIELD_INT("run", "metrics_every", metrics_every),
        FIELD_INT("run", "metrics_flush_every", metrics_flush_every),

        FIELD_INT("model", "groups", groups),
        FIELD_INT("model", "cells_per_group", cells_per_group),
        FIELD_INT("model", "winners", winners),
        FIELD_STRING("model", "strategy", strategy),
        FIELD_DOUBLE("model", "boost_strength", boost_strength),
        FIELD_DOUBLE("model", "boost_factor", boost_factor),
        FIELD_LONG("model", "epoch_steps", epoch_steps),
        FIELD_DOUBLE("model", "duty_alpha", duty_alpha),
        FIELD_BOOL("model", "trainable_decay", trainable_decay),
        FIELD_DOUBLE("model", "fixed_decay", fixed_decay),
        FIELD_DOUBLE("model", "decay_ceiling", decay_ceiling),
        FIELD_STRING("model", "partitions", partitions),
        FIELD_DOUBLE("model", "inhibition_decay", inhibition_decay),
        FIELD_DOUBLE("model", "inhibition_strength", inhibition_strength),
        FIELD_STRING("model", "element_type", element_type),

        FIELD_DOUBLE("train", "learning_rate", learning_rate),
        FIELD_DOUBLE("train", "classifier_learning_rate", classifier_learning_rate),
        FIELD_INT("train", "classifier_hidden", classifier_hidden),
        FIELD_STRING("train", "classifier_input", classifier_input),
        FIELD_DOUBLE("train", "prob_forget", prob_forget),
        FIELD_DOUBLE("train", "decoder_l2", decoder_l2),
        FIELD_LONG("train", "rsm_freeze_step", rsm_freeze_step),

        FIELD_STRING("ssmnist", "grammar", grammar),
        FIELD_STRING("ssmnist", "observation", observation),
        FIELD_STRING("ssmnist", "image_source", image_source),
        FIELD_STRING("ssmnist", "mnist_dir", mnist_dir),
        FIELD_INT("ssmnist", "synthetic_variants", synthetic_variants),
        FIELD_DOUBLE("ssmnist", "synthetic_noise", synthetic_noise),

        FIELD_STRING("lm", "corpus_train", corpus_train),
        FIELD_STRING("lm", "corpus_valid", corpus_valid),
        FIELD_STRING("lm", "corpus_test", corpus_test),
        FIELD_STRING("lm", "embedding", embedding),
        FIELD_STRING("lm", "embedding_file", embedding_file),
        FIELD_DOUBLE("lm", "uniform_mass_weight", uniform_mass_weight),
        FIELD_DOUBLE("lm", "cache_weight", cache_weight),
        FIELD_DOUBLE("lm", "cache_decay", cache_decay),
    };
    return fields;
}

const FieldDef* find_field(const std::string& key) {
    for (const FieldDef& f : registry())
        if (key == f.key) return &f;
    return nullptr;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

void RunConfig::validate() const {
    require(steps >= 1, "config: steps must be >= 1");
    require(batch_size >= 1, "config: batch_size must be >= 1");
    require(eval_every >= 1 && eval_steps >= 1, "config: eval cadence must be >= 1");
    require(metrics_every >= 1 && metrics_flush_every >= 1,
            "config: metric cadence must be >= 1");
    if (strategy != "boosting" && strategy != "inhibition" && strategy != "none")
        throw ConfigError("config: strategy must be boosting, inhibition or none");
    require(boost_strength >= 0.0, "config: boost_strength must be >= 0");
    require(boost_factor > 0.0 && boost_factor <= 1.0,
            "config: boost_factor must lie in (0, 1]");
    require(epoch_steps >= 1, "config: epoch_steps must be >= 1");
    require(prob_forget >= 0.0 && prob_forget <= 1.0,
            "config: prob_forget must lie in [0, 1]");
    require(decoder_l2 >= 0.0, "config: decoder_l2 must be >= 0");
    if (element_type != "f64")
        throw ConfigError("config: element_type '" + element_type +
                          "' is not available in this build (use f64)");
    if (observation != "fixed" && observation != "random")
        throw ConfigError("config: observation must be fixed or random");
    if (image_source != "synthetic" && image_source != "mnist")
        throw ConfigError("config: image_source must be synthetic or mnist");
    if (embedding != "synthetic" && embedding != "file")
        throw ConfigError("config: embedding must be synthetic or file");
    if (classifier_input != "activation" && classifier_input != "trace")
        throw ConfigError("config: classifier_input must be activation or trace");
    MixWeights{uniform_mass_weight, cache_weight}.validate();
    require(cache_decay >= 0.0 && cache_decay <= 1.0,
            "config: cache_decay must lie in [0, 1]");
    to_geometry(1).validate();
    to_rsm_options();  // throws via RsmLayer later, but sanity-check ranges now
    require(learning_rate > 0.0 && classifier_learning_rate > 0.0,
            "config: learning rates must be positive");
    require(classifier_hidden >= 1, "config: classifier_hidden must be >= 1");
    require(synthetic_variants >= 1, "config: synthetic_variants must be >= 1");
    require(synthetic_noise >= 0.0, "config: synthetic_noise must be >= 0");
}

LayerGeometry RunConfig::to_geometry(int input_dim) const {
    LayerGeometry geom;
    geom.groups = groups;
    geom.cells_per_group = cells_per_group;
    geom.winners = winners;
    geom.input_dim = input_dim;
    geom.partitions = parse_partitions(partitions);
    return geom;
}

UtilizationStrategy RunConfig::strategy_kind() const {
    if (strategy == "boosting") return UtilizationStrategy::Boosting;
    if (strategy == "inhibition") return UtilizationStrategy::Inhibition;
    return UtilizationStrategy::None;
}

RsmOptions RunConfig::to_rsm_options() const {
    RsmOptions opts;
    opts.strategy = strategy_kind();
    opts.boost_strength = boost_strength;
    opts.duty_alpha = duty_alpha;
    opts.trainable_decay = trainable_decay;
    opts.fixed_decay = fixed_decay;
    opts.decay_ceiling = decay_ceiling;
    opts.inhibition_decay = inhibition_decay;
    opts.inhibition_strength = inhibition_strength;
    return opts;
}

std::string dump_config(const RunConfig& cfg) {
    std::ostringstream os;
    std::string section;
    for (const FieldDef& f : registry()) {
        if (section != f.section) {
            if (!section.empty()) os << '\n';
            section = f.section;
            os << '[' << section << "]\n";
        }
        os << f.key << " = " << f.get(cfg) << '\n';
    }
    return os.str();
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": malformed section header");
            continue;  // sections are cosmetic; keys are globally unique
        }
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        apply_override(cfg, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    return parse_config_text(read_text_file(path));
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    const FieldDef* field = find_field(key);
    if (!field) throw ConfigError("config: unknown key '" + key + "'");
    try {
        field->set(cfg, value);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("config: bad value '" + value + "' for key '" + key + "'");
    }
}

std::optional<PartitionSpec> parse_partitions(const std::string& text) {
    if (trim(text).empty()) return std::nullopt;
    PartitionSpec spec;
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ',')) {
        item = trim(item);
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw ConfigError("partitions: expected kind:count, got '" + item + "'");
        const std::string kind = trim(item.substr(0, colon));
        PartitionBlock block;
        if (kind == "ff")
            block.kind = PartitionKind::FeedForwardOnly;
        else if (kind == "rec")
            block.kind = PartitionKind::RecurrentOnly;
        else if (kind == "int")
            block.kind = PartitionKind::Integrated;
        else
            throw ConfigError("partitions: unknown kind '" + kind + "' (use ff, rec, int)");
        block.cells = static_cast<int>(parse_long("partitions", trim(item.substr(colon + 1))));
        require(block.cells >= 1, "partitions: block sizes must be >= 1");
        spec.blocks.push_back(block);
    }
    require(!spec.blocks.empty(), "partitions: empty specification");
    return spec;
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string config_hash(const RunConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(dump_config(cfg))));
    return buf;
}

}  // namespace brsm
