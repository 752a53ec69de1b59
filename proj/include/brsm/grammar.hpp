#pragma once

#include <string>
#include <vector>

#include "brsm/linalg.hpp"

namespace brsm {

// A stochastic sequential grammar: m sub-sequences of n labels each. Streams
// are built by picking a sub-sequence uniformly at random, emitting it in
// full, and repeating, with no boundary markers.
struct GrammarSpec {
    std::vector<std::vector<int>> rows;
    int alphabet = 10;

    int num_subsequences() const { return static_cast<int>(rows.size()); }
    int length() const { return rows.empty() ? 0 : static_cast<int>(rows[0].size()); }

    void validate() const;

    // Plain text: one sub-sequence per line, comma-separated labels.
    std::string to_text() const;
    static GrammarSpec from_text(const std::string& text);

    // The 8x9 fixture used for reported accuracy numbers.
    static GrammarSpec builtin_8x9();
};

// m random sub-sequences of n labels. With distinct_prefix set, no two
// sub-sequences share their first two labels (rejection sampling).
GrammarSpec gen_grammar(int m, int n, Rng& rng, bool distinct_prefix = false, int alphabet = 10);

// Concatenated uniformly chosen sub-sequences, truncated to `length`.
std::vector<int> sample_stream(const GrammarSpec& grammar, int length, Rng& rng);

// Incremental sampler with the same semantics as sample_stream.
class GrammarStream {
  public:
    GrammarStream(const GrammarSpec& grammar, std::uint64_t seed);

    int next();
    // True right before a fresh sub-sequence starts.
    bool at_boundary() const { return pos_ == 0; }

  private:
    const GrammarSpec* grammar_;
    Rng rng_;
    int row_ = 0;
    int pos_ = 0;
};

// Bayes-optimal tracker over (sub-sequence, position) hypotheses. Weights
// sum to 1 after every update. Completed mass redistributes uniformly over
// all sub-sequences at position zero, exactly mirroring the generator.
class BeliefState {
  public:
    enum class Start { Boundary, Stationary };

    BeliefState(const GrammarSpec& grammar, Start start = Start::Boundary);

    // Probability of each label appearing next.
    Vector next_label_distribution() const;
    // Argmax of the label distribution; ties break toward the lower label.
    int predict() const;
    // Condition on an observed label, then advance one position.
    void observe(int label);

    double weight_sum() const;
    const Vector& weights() const { return weights_; }

  private:
    const GrammarSpec* grammar_;
    Vector weights_;  // flat (row, position)
};

// Expected per-step accuracy of the Bayes-optimal predictor, computed
// exactly. Because sub-sequences share one length, the belief after any
// boundary-synchronized history is uniform over the rows matching the
// observed prefix; summing the best label count over every reachable prefix
// gives the closed form.
double ceiling_exact(const GrammarSpec& grammar);

struct MonteCarloEstimate {
    double accuracy = 0.0;
    double stderr_est = 0.0;
    long trials = 0;
};

// Runs the same Bayes-optimal predictor on a sampled stream.
MonteCarloEstimate ceiling_montecarlo(const GrammarSpec& grammar, long steps, Rng& rng);

// Online count-based argmax predictor conditioned on the previous `order`
// labels. Returns the running accuracy over all predictions it makes
// (from step `order` on).
double ngram_accuracy(const std::vector<int>& stream, int order, int alphabet);

}  // namespace brsm
