#pragma once

#include <string>
#include <vector>

#include "brsm/config.hpp"
#include "brsm/core.hpp"
#include "brsm/learning.hpp"

namespace brsm {

// Versioned binary container for a full training snapshot. The header
// records the format version and element width; payload shapes are
// validated against the embedded config on load.

struct AdamSnapshot {
    long steps = 0;
    std::vector<AdamSlot> slots;
};

struct ClassifierSnapshot {
    int input_dim = 0;
    int hidden_dim = 0;
    int output_dim = 0;
    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;
    AdamSnapshot adam;
};

struct CheckpointData {
    TaskKind task = TaskKind::Ssmnist;
    std::string config_text;

    LayerWeights weights;
    Vector duty;
    double beta = 0.0;
    Vector inhibition;
    AdamSnapshot rsm_adam;

    ClassifierSnapshot classifier;

    std::vector<std::string> rng_states;

    // Language-model extras.
    std::vector<std::string> vocab_words;
    int embedding_dim = 0;
    std::vector<Vector> embedding_vectors;  // empty for the synthetic code
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

}  // namespace brsm
