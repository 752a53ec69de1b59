#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "brsm/checkpoint.hpp"
#include "brsm/config.hpp"
#include "brsm/core.hpp"
#include "brsm/data.hpp"
#include "brsm/grammar.hpp"
#include "brsm/learning.hpp"
#include "brsm/metrics.hpp"
#include "brsm/readout.hpp"

namespace brsm {

// Deterministic sub-stream seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream_id);

int argmax(const Vector& v);

// Accumulates time-local gradients into one batch update.
void backward_accumulate(Gradients& acc, const StepOutput& step, const LayerWeights& weights,
                         const LayerGeometry& geom, const Vector& loss_grad, double decoder_l2);

struct TrainSummary {
    long steps_run = 0;
    double final_eval = 0.0;       // accuracy (ssmnist) or perplexity (lm)
    double best_eval = 0.0;
    long reached_target_at = -1;   // step of first eval meeting stop_at, or -1
    double final_train_entropy = 0.0;  // layer entropy of the duty cycles
    double final_loss = 0.0;           // mean training loss of the last window
};

struct SsmnistEval {
    double accuracy = 0.0;
    double entropy = 0.0;  // binary entropy of empirical firing rates
    long steps = 0;
};

// ssMNIST: grammar-driven observation stream, MSE-trained core, isolated
// label classifier.
class SsmnistHarness {
  public:
    // eval_pool, when given, feeds held-out evaluation streams (e.g. MNIST
    // test images) while `pool` feeds training; otherwise both share `pool`.
    SsmnistHarness(const RunConfig& cfg, GrammarSpec grammar, ImagePool pool,
                   std::optional<ImagePool> eval_pool = std::nullopt);

    // Restore model parameters from a checkpoint snapshot (data pipelines
    // are rebuilt from the config).
    void restore(const CheckpointData& data);
    CheckpointData snapshot() const;

    // stop_at: end early once a periodic evaluation reaches this accuracy.
    TrainSummary train(MetricWriter* metrics,
                       std::optional<double> stop_at = std::nullopt);

    SsmnistEval evaluate(std::uint64_t eval_seed, int steps);

    const RsmLayer& layer() const { return *layer_; }
    RsmLayer& layer() { return *layer_; }
    const Classifier& classifier() const { return *classifier_; }
    const RunConfig& config() const { return cfg_; }
    const GrammarSpec& grammar() const { return grammar_; }

  private:
    struct Lane {
        GrammarStream stream;
        Rng observe_rng;
        Rng forget_rng;
        LayerState state;
        int current_label = 0;
        Vector current_obs;
    };

    Vector classifier_input(const StepOutput& out, const LayerState& state) const;
    void make_lanes();

    RunConfig cfg_;
    GrammarSpec grammar_;
    ImagePool pool_;
    std::optional<ImagePool> eval_pool_;
    ObserveMode mode_;
    std::unique_ptr<RsmLayer> layer_;
    std::unique_ptr<Classifier> classifier_;
    AdamState rsm_adam_;
    AdamState cls_adam_;
    std::vector<Lane> lanes_;
    Rng master_rng_;
    long step_ = 0;
};

struct LmEval {
    double perplexity = 0.0;
    double entropy = 0.0;
    long tokens = 0;
};

// Precomputed per-index embeddings feeding the core as inputs and targets.
class EmbeddingProvider {
  public:
    static EmbeddingProvider synthetic(int vocab_size);
    static EmbeddingProvider from_table(const EmbeddingTable& table, const Vocabulary& vocab);
    static EmbeddingProvider from_vectors(std::vector<Vector> vectors);

    int dim() const { return dim_; }
    int vocab_size() const { return static_cast<int>(vectors_.size()); }
    const Vector& embed(int index) const;
    const std::vector<Vector>& vectors() const { return vectors_; }

  private:
    std::vector<Vector> vectors_;
    int dim_ = 0;
};

// Unigram distribution from a training stream, interpolated with a uniform
// floor; the reference baseline for perplexity comparisons.
double unigram_perplexity(const std::vector<int>& train_stream,
                          const std::vector<int>& eval_stream, int vocab_size,
                          double uniform_mass);

// Next-word prediction: MSE-trained core on next-token embeddings, classifier
// on next-token identity, cache/uniform interpolation at evaluation.
class LmHarness {
  public:
    LmHarness(const RunConfig& cfg, Vocabulary vocab, std::vector<int> train_stream,
              std::vector<int> valid_stream, std::vector<int> test_stream,
              EmbeddingProvider embedding);

    void restore(const CheckpointData& data);
    CheckpointData snapshot() const;

    // stop_at: end early once a periodic evaluation's perplexity drops to
    // this value or below.
    TrainSummary train(MetricWriter* metrics,
                       std::optional<double> stop_at = std::nullopt);

    LmEval evaluate(const std::vector<int>& stream);
    double baseline_perplexity(const std::vector<int>& stream) const;

    const RsmLayer& layer() const { return *layer_; }
    RsmLayer& layer() { return *layer_; }
    const Classifier& classifier() const { return *classifier_; }
    const Vocabulary& vocabulary() const { return vocab_; }
    const EmbeddingProvider& embedding() const { return embedding_; }
    const std::vector<int>& test_stream() const { return test_; }

  private:
    struct Lane {
        std::size_t pos = 0;
        Rng forget_rng;
        LayerState state;
    };

    Vector classifier_input(const StepOutput& out, const LayerState& state) const;
    void make_lanes();

    RunConfig cfg_;
    Vocabulary vocab_;
    std::vector<int> train_;
    std::vector<int> valid_;
    std::vector<int> test_;
    EmbeddingProvider embedding_;
    std::unique_ptr<RsmLayer> layer_;
    std::unique_ptr<Classifier> classifier_;
    AdamState rsm_adam_;
    AdamState cls_adam_;
    std::vector<Lane> lanes_;
    Rng master_rng_;
    long step_ = 0;
};

}  // namespace brsm
