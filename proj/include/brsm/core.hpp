#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "brsm/linalg.hpp"

namespace brsm {

// ---------------------------------------------------------------------------
// Geometry and partitioning
// ---------------------------------------------------------------------------

enum class PartitionKind { FeedForwardOnly, RecurrentOnly, Integrated };

struct PartitionBlock {
    PartitionKind kind = PartitionKind::Integrated;
    int cells = 0;
};

// Splits the cell population into blocks of contiguous flat indices, each
// with its own winner budget proportional to its size.
struct PartitionSpec {
    std::vector<PartitionBlock> blocks;

    int total_cells() const;
    // floor(k * cells_p / total) per block, remainder handed to blocks in
    // descending size order so the budgets sum to k exactly.
    std::vector<int> winner_counts(int k) const;
};

struct LayerGeometry {
    int groups = 1;          // m
    int cells_per_group = 1; // n; 1 = flattened
    int winners = 1;         // k
    int input_dim = 1;       // d_in
    std::optional<PartitionSpec> partitions;

    int cells() const { return groups * cells_per_group; }
    bool flattened() const { return cells_per_group == 1; }
    double expected_sparseness() const {
        return static_cast<double>(winners) / static_cast<double>(cells());
    }
    void validate() const;
};

// ---------------------------------------------------------------------------
// Parameters and per-sequence state
// ---------------------------------------------------------------------------

struct LayerWeights {
    Matrix w_ff;   // groups x input_dim
    Matrix w_rec;  // cells x cells
    Matrix w_dec;  // input_dim x groups; transpose shape of w_ff
    Vector decay_logits;  // cells; only populated when decay is trainable

    void validate(const LayerGeometry& geom) const;
};

// Per-sequence recurrent state. The memory trace used by a step is rebuilt
// from (prev_trace, prev_output) at the top of that step, so the decay
// parameter always sees the current weights while history stays constant.
struct LayerState {
    Vector prev_trace;   // trace before the last decay/merge
    Vector prev_output;  // last activation, clamped to >= 0
    Vector trace;        // merged trace used by the last step (psi)
    Vector rec_input;    // normalized trace used by the last step (x^B)

    static LayerState zeros(int cells);
    void clear();  // forget: zero everything
};

// Mask pair from the sparsening step. group_winner[i] is the most active
// cell within group i (always defined); group_active[i] says whether group i
// is among the k winners.
struct Masks {
    std::vector<std::uint8_t> group_active;  // m
    std::vector<int> group_winner;           // m
};

// Everything one forward step computed, retained for the local backward pass.
struct StepOutput {
    Vector input;          // x^A
    Vector rec_input;      // x^B actually used
    Vector ff_sum;         // z^A, length m
    Vector rec_sum;        // z^B, length cells (flat m x n)
    Vector boost;          // per-cell boost factor, 1 everywhere when disabled
    Vector sigma;          // boosted (and partition-composed) pre-activation
    Masks masks;
    Vector activation;            // y, flat
    Vector group_max_value;       // y^lambda, length m
    std::vector<int> group_max_cell;  // argmax cell per group in y
    Vector prediction;            // x^hat
    std::vector<int> winner_cells;    // flat indices active in the final mask

    // Memory bookkeeping for the decay gradient.
    Vector mem_prev_trace;               // stop(prev_trace)
    Vector mem_prev_output;              // stop(prev_output)
    Vector mem_decay;                    // effective per-cell decay used
    std::vector<std::uint8_t> mem_from_decay;   // merge branch per cell
    std::vector<std::uint8_t> decay_clamped;    // sigmoid hit the ceiling
    double mem_sum = 0.0;                // sum of merged trace (normalizer)
};

// ---------------------------------------------------------------------------
// Step operations
// ---------------------------------------------------------------------------

// z^A = w_ff x
Vector ff_contribution(const Matrix& w_ff, const Vector& input);

// z^B = w_rec x^B, flat length cells
Vector rec_contribution(const Matrix& w_rec, const Vector& rec_input);

// b_i = exp(beta * (target_sparseness - duty_i)); beta = 0 disables boosting.
Vector compute_boost(const Vector& duty, double beta, double target_sparseness);

// sigma_ij = (z^A_i + z^B_ij) * b_ij with z^A broadcast over the group.
Vector combine_boost(const Vector& ff_sum, const Vector& rec_sum, const Vector& boost, int groups,
                     int cells_per_group);

// Partition-aware variant: feed-forward-only blocks use z^A * b alone,
// recurrent-only blocks z^B * b alone, integrated blocks the full sum.
// Requires a flattened layer.
Vector combine_boost_partitioned(const Vector& ff_sum, const Vector& rec_sum, const Vector& boost,
                                 const PartitionSpec& partitions);

// group_winner = argmax over each group's cells; group_active = the k groups
// with the largest winning-cell value. Ties break toward the lowest index.
// `priority` defaults to sigma; the inhibition ablation passes an adjusted
// ranking signal while activation still reads sigma.
Masks topk_masks(const Vector& sigma, const LayerGeometry& geom);
Masks topk_masks_priority(const Vector& sigma, const Vector& priority, const LayerGeometry& geom);

// Per-partition top-k over a flattened layer, budgets from winner_counts().
Masks partitioned_topk(const Vector& sigma, const LayerGeometry& geom);
Masks partitioned_topk_priority(const Vector& sigma, const Vector& priority,
                                const LayerGeometry& geom);

// y = tanh(sigma * masks); masked-out cells are exactly zero.
Vector activate(const Vector& sigma, const Masks& masks, int groups, int cells_per_group);

// y^lambda_i = max_j y_ij. Literal max, not max-magnitude. argmax_out, when
// given, receives the per-group source cell for gradient routing.
Vector group_max(const Vector& activation, int groups, int cells_per_group,
                 std::vector<int>* argmax_out = nullptr);

// x^hat = w_dec y^lambda
Vector decode(const Matrix& w_dec, const Vector& group_max_value);

// trace' = max(trace * decay, clamp0(activation)), elementwise.
// branch_out[i] = 1 where the decayed trace won the max.
Vector update_memory(const Vector& trace, const Vector& activation, const Vector& decay,
                     std::vector<std::uint8_t>* branch_out = nullptr);

// x^B = trace / sum(trace), or all zeros for an empty trace.
Vector normalize_recurrent(const Vector& trace);

// d' = (1 - alpha) d + alpha * indicator, indicator in [0, 1] per cell
// (a batch-mean of winner flags stays inside the unit interval).
void update_duty(Vector& duty, const Vector& indicator, double alpha);
void update_duty(Vector& duty, const std::vector<int>& winner_cells, double alpha);

// ---------------------------------------------------------------------------
// Layer model: weights + layer-wide statistics + the composed forward step
// ---------------------------------------------------------------------------

enum class UtilizationStrategy { None, Boosting, Inhibition };

struct RsmOptions {
    UtilizationStrategy strategy = UtilizationStrategy::Boosting;
    double boost_strength = 1.2;       // initial beta
    double duty_alpha = 0.005;         // duty-cycle EMA rate
    bool trainable_decay = false;
    double fixed_decay = 0.85;         // epsilon when decay is not trainable
    double decay_ceiling = 0.99;       // cap on sigmoid(decay_logits)
    double initial_decay_logit = 1.5;  // sigmoid(1.5) ~ 0.82
    double inhibition_decay = 0.5;
    double inhibition_strength = 1.0;
};

class RsmLayer {
  public:
    RsmLayer(const LayerGeometry& geom, const RsmOptions& opts, Rng& rng);
    RsmLayer(LayerGeometry geom, RsmOptions opts, LayerWeights weights);

    const LayerGeometry& geometry() const { return geom_; }
    const RsmOptions& options() const { return opts_; }
    LayerWeights& weights() { return weights_; }
    const LayerWeights& weights() const { return weights_; }

    const Vector& duty() const { return duty_; }
    Vector& duty() { return duty_; }
    double boost_strength() const { return beta_; }
    void set_boost_strength(double beta) { beta_ = beta; }
    const Vector& inhibition_trace() const { return inhibition_; }
    Vector& inhibition_trace() { return inhibition_; }

    LayerState make_state() const { return LayerState::zeros(geom_.cells()); }

    // Effective per-cell decay under the current parameters.
    Vector effective_decay() const;

    // One forward step. Rebuilds the recurrent input from the state's
    // retained history, runs the network, then advances the state. When
    // update_stats is false the duty cycle and inhibition trace are left
    // untouched (batch training aggregates them itself).
    StepOutput forward(const Vector& input, LayerState& state, bool update_stats = true);

    // Apply a duty/inhibition update from a batch-mean winner indicator.
    void update_stats(const Vector& mean_indicator);

  private:
    void update_stats_from(const Vector& indicator);

    LayerGeometry geom_;
    RsmOptions opts_;
    LayerWeights weights_;
    Vector duty_;
    double beta_ = 0.0;
    Vector inhibition_;
};

}  // namespace brsm
