#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "brsm/core.hpp"
#include "brsm/learning.hpp"
#include "brsm/readout.hpp"

namespace brsm {

enum class TaskKind { Ssmnist, Lm };

// Every run-level knob, with defaults for the desk-scale experiments. The
// canonical text form is line-oriented `key = value` under [section]
// headers; unknown keys are hard errors and the dump/parse pair round-trips.
struct RunConfig {
    // [run]
    std::uint64_t seed = 1;
    long steps = 20000;
    int batch_size = 1;
    std::string run_id;  // empty: derived as "<command>-seed<seed>"
    std::string out_dir = "runs";
    long eval_every = 2000;
    int eval_steps = 2000;
    int metrics_every = 200;
    int metrics_flush_every = 1;

    // [model]
    int groups = 200;
    int cells_per_group = 1;
    int winners = 24;
    std::string strategy = "boosting";  // boosting | inhibition | none
    double boost_strength = 1.2;
    double boost_factor = 0.85;
    long epoch_steps = 1000;
    double duty_alpha = 0.005;
    bool trainable_decay = false;
    double fixed_decay = 0.85;
    double decay_ceiling = 0.99;
    std::string partitions;  // "ff:70,rec:850,int:80"; empty = none
    double inhibition_decay = 0.5;
    double inhibition_strength = 1.0;
    std::string element_type = "f64";

    // [train]
    double learning_rate = 5e-4;
    double classifier_learning_rate = 1e-3;
    int classifier_hidden = 100;
    std::string classifier_input = "activation";  // activation | trace
    double prob_forget = 0.0;
    double decoder_l2 = 0.0;
    long rsm_freeze_step = -1;  // <0: never freeze

    // [ssmnist]
    std::string grammar = "builtin:paper-8x9";  // file path or builtin:<name>
    std::string observation = "fixed";          // fixed | random
    std::string image_source = "synthetic";     // synthetic | mnist
    std::string mnist_dir;
    int synthetic_variants = 20;
    double synthetic_noise = 0.25;

    // [lm]
    std::string corpus_train;
    std::string corpus_valid;
    std::string corpus_test;
    std::string embedding = "synthetic";  // synthetic | file
    std::string embedding_file;
    double uniform_mass_weight = 0.01;
    double cache_weight = 0.07;
    double cache_decay = 0.99;

    void validate() const;

    LayerGeometry to_geometry(int input_dim) const;
    RsmOptions to_rsm_options() const;
    AdamConfig to_adam_config() const { return AdamConfig{learning_rate, 0.9, 0.999, 1e-8}; }
    AdamConfig to_classifier_adam_config() const {
        return AdamConfig{classifier_learning_rate, 0.9, 0.999, 1e-8};
    }
    MixWeights to_mix_weights() const { return MixWeights{uniform_mass_weight, cache_weight}; }
    UtilizationStrategy strategy_kind() const;
};

// Canonical text form; parse(dump(c)) reproduces c exactly.
std::string dump_config(const RunConfig& cfg);
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// Apply one "key=value" override (CLI flags beat file values).
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// "kind:count,..." with kinds ff, rec, int.
std::optional<PartitionSpec> parse_partitions(const std::string& text);

// FNV-1a over the canonical dump, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);
std::uint64_t fnv1a64(const std::string& text);

}  // namespace brsm
