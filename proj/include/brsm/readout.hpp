#pragma once

#include "brsm/learning.hpp"
#include "brsm/linalg.hpp"

namespace brsm {

// ---------------------------------------------------------------------------
// Classifier: 2-layer fully connected net with a leaky rectifier, trained on
// cross-entropy against the true label. It reads the recurrent layer's
// hidden state but never sends gradients back into it.
// ---------------------------------------------------------------------------

struct ClassifierConfig {
    int input_dim = 1;
    int hidden_dim = 1200;
    int output_dim = 1;
    double leaky_slope = 0.01;
};

class Classifier {
  public:
    Classifier(const ClassifierConfig& cfg, Rng& rng);

    const ClassifierConfig& config() const { return cfg_; }

    struct Forward {
        Vector input;
        Vector hidden_pre;  // before the rectifier
        Vector hidden;
        Vector logits;
        Vector probs;
    };

    Forward forward(const Vector& input) const;
    static Vector softmax(const Vector& logits);

    struct Grads {
        Matrix w1;
        Vector b1;
        Matrix w2;
        Vector b2;

        static Grads zeros(const ClassifierConfig& cfg);
        void add(const Grads& other);
        void scale(double s);
    };

    double cross_entropy(const Forward& fwd, int label) const;
    // Cross-entropy gradients for one example. The input is a constant.
    Grads backward(const Forward& fwd, int label) const;

    std::vector<std::size_t> tensor_sizes() const;
    void apply_update(AdamState& adam, const Grads& grads);

    Matrix& w1() { return w1_; }
    Vector& b1() { return b1_; }
    Matrix& w2() { return w2_; }
    Vector& b2() { return b2_; }
    const Matrix& w1() const { return w1_; }
    const Vector& b1() const { return b1_; }
    const Matrix& w2() const { return w2_; }
    const Vector& b2() const { return b2_; }

  private:
    ClassifierConfig cfg_;
    Matrix w1_;
    Vector b1_;
    Matrix w2_;
    Vector b2_;
};

// Convenience for single-example training (batch paths accumulate Grads
// themselves). Returns the example's cross-entropy.
double classifier_train_step(Classifier& net, AdamState& adam, const Vector& input, int label);

// ---------------------------------------------------------------------------
// Word cache and distribution mixing for language-model evaluation
// ---------------------------------------------------------------------------

// Per-vocabulary recency scores in [0, 1]. Observation pins a token's score
// to 1; every step multiplies the whole cache by the decay rate.
class WordCache {
  public:
    WordCache(int vocab_size, double decay_rate);

    int vocab_size() const { return static_cast<int>(scores_.size()); }
    double decay_rate() const { return decay_; }
    const Vector& scores() const { return scores_; }

    void observe(int token);
    void reset();

  private:
    Vector scores_;
    double decay_;
};

struct MixWeights {
    double uniform_mass = 0.0;
    double cache_weight = 0.0;

    double model_weight() const { return 1.0 - uniform_mass - cache_weight; }
    void validate() const;
};

// Weighted average of the model distribution, the normalized cache (an empty
// cache contributes the uniform distribution), and a uniform floor.
Vector mix_distributions(const Vector& model_dist, const WordCache& cache, const MixWeights& mix);

}  // namespace brsm
