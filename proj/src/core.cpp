#include "brsm/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace brsm {

// ---------------------------------------------------------------------------
// PartitionSpec / LayerGeometry
// ---------------------------------------------------------------------------

int PartitionSpec::total_cells() const {
    int total = 0;
    for (const auto& b : blocks) total += b.cells;
    return total;
}

std::vector<int> PartitionSpec::winner_counts(int k) const {
    const int total = total_cells();
    require(!blocks.empty(), "PartitionSpec: no blocks");
    require(k >= 1 && k <= total, "PartitionSpec: invalid winner count");
    std::vector<int> counts(blocks.size(), 0);
    int assigned = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        counts[i] = static_cast<int>(
            std::floor(static_cast<double>(k) * blocks[i].cells / static_cast<double>(total)));
        assigned += counts[i];
    }
    // Hand the remainder to the largest blocks first; ties toward the
    // earlier block for determinism.
    std::vector<std::size_t> order(blocks.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (blocks[a].cells != blocks[b].cells) return blocks[a].cells > blocks[b].cells;
        return a < b;
    });
    for (std::size_t i = 0; assigned < k; ++i) {
        counts[order[i % order.size()]] += 1;
        ++assigned;
    }
    for (std::size_t i = 0; i < counts.size(); ++i)
        if (counts[i] == 0)
            throw ConfigError("partition " + std::to_string(i) +
                              " receives zero winners; enlarge it or raise k");
    return counts;
}

void LayerGeometry::validate() const {
    require_dim(groups >= 1 && cells_per_group >= 1 && winners >= 1 && input_dim >= 1,
                "LayerGeometry: all dimensions must be >= 1");
    require_dim(winners <= groups, "LayerGeometry: winner count exceeds group count");
    if (partitions) {
        if (cells_per_group != 1)
            throw ConfigError("functional partitioning requires a flattened layer (n = 1)");
        if (partitions->total_cells() != cells())
            throw ConfigError("partition sizes must cover the layer exactly");
        partitions->winner_counts(winners);  // throws on a zero budget
    }
}

void LayerWeights::validate(const LayerGeometry& geom) const {
    require_dim(w_ff.rows() == geom.groups && w_ff.cols() == geom.input_dim,
                "LayerWeights: feed-forward table shape mismatch");
    require_dim(w_rec.rows() == geom.cells() && w_rec.cols() == geom.cells(),
                "LayerWeights: recurrent table shape mismatch");
    // Decoder is the transpose shape of the feed-forward table.
    require_dim(w_dec.rows() == geom.input_dim && w_dec.cols() == geom.groups,
                "LayerWeights: decoder table shape mismatch");
    if (!decay_logits.empty())
        require_dim(static_cast<int>(decay_logits.size()) == geom.cells(),
                    "LayerWeights: decay logits length mismatch");
}

LayerState LayerState::zeros(int cells) {
    LayerState s;
    s.prev_trace.assign(cells, 0.0);
    s.prev_output.assign(cells, 0.0);
    s.trace.assign(cells, 0.0);
    s.rec_input.assign(cells, 0.0);
    return s;
}

void LayerState::clear() {
    std::fill(prev_trace.begin(), prev_trace.end(), 0.0);
    std::fill(prev_output.begin(), prev_output.end(), 0.0);
    std::fill(trace.begin(), trace.end(), 0.0);
    std::fill(rec_input.begin(), rec_input.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Step operations
// ---------------------------------------------------------------------------

Vector ff_contribution(const Matrix& w_ff, const Vector& input) { return matvec(w_ff, input); }

Vector rec_contribution(const Matrix& w_rec, const Vector& rec_input) {
    return matvec(w_rec, rec_input);
}

Vector compute_boost(const Vector& duty, double beta, double target_sparseness) {
    require(beta >= 0.0, "compute_boost: boost strength must be non-negative");
    Vector boost(duty.size(), 1.0);
    if (beta == 0.0) return boost;
    for (std::size_t i = 0; i < duty.size(); ++i)
        boost[i] = std::exp(beta * (target_sparseness - duty[i]));
    return boost;
}

Vector combine_boost(const Vector& ff_sum, const Vector& rec_sum, const Vector& boost, int groups,
                     int cells_per_group) {
    const std::size_t cells = static_cast<std::size_t>(groups) * cells_per_group;
    require_dim(ff_sum.size() == static_cast<std::size_t>(groups) && rec_sum.size() == cells &&
                    boost.size() == cells,
                "combine_boost: shape mismatch");
    Vector sigma(cells, 0.0);
    for (int g = 0; g < groups; ++g) {
        for (int c = 0; c < cells_per_group; ++c) {
            const std::size_t i = static_cast<std::size_t>(g) * cells_per_group + c;
            require(boost[i] > 0.0, "combine_boost: boost values must be positive");
            sigma[i] = (ff_sum[g] + rec_sum[i]) * boost[i];
        }
    }
    return sigma;
}

Vector combine_boost_partitioned(const Vector& ff_sum, const Vector& rec_sum, const Vector& boost,
                                 const PartitionSpec& partitions) {
    const std::size_t cells = ff_sum.size();
    require_dim(rec_sum.size() == cells && boost.size() == cells,
                "combine_boost_partitioned: shape mismatch (flattened layer expected)");
    require_dim(partitions.total_cells() == static_cast<int>(cells),
                "combine_boost_partitioned: partition sizes do not cover the layer");
    Vector sigma(cells, 0.0);
    std::size_t i = 0;
    for (const auto& block : partitions.blocks) {
        for (int c = 0; c < block.cells; ++c, ++i) {
            require(boost[i] > 0.0, "combine_boost_partitioned: boost values must be positive");
            double pre = 0.0;
            switch (block.kind) {
                case PartitionKind::FeedForwardOnly: pre = ff_sum[i]; break;
                case PartitionKind::RecurrentOnly: pre = rec_sum[i]; break;
                case PartitionKind::Integrated: pre = ff_sum[i] + rec_sum[i]; break;
            }
            sigma[i] = pre * boost[i];
        }
    }
    return sigma;
}

namespace {

void check_no_nan(const Vector& v, const char* what) {
    for (double x : v)
        if (std::isnan(x)) throw Error(std::string(what) + ": NaN encountered");
}

// Indices of the k largest values; ties break toward the lower index.
std::vector<int> top_k_indices(const Vector& values, int k) {
    std::vector<int> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;
    });
    order.resize(k);
    return order;
}

}  // namespace

Masks topk_masks_priority(const Vector& sigma, const Vector& priority,
                          const LayerGeometry& geom) {
    const int m = geom.groups, n = geom.cells_per_group;
    require_dim(sigma.size() == static_cast<std::size_t>(geom.cells()) &&
                    priority.size() == sigma.size(),
                "topk_masks: shape mismatch");
    check_no_nan(priority, "topk_masks");
    Masks masks;
    masks.group_active.assign(m, 0);
    masks.group_winner.assign(m, 0);
    Vector strength(m, 0.0);
    for (int g = 0; g < m; ++g) {
        int best = 0;
        double best_v = priority[static_cast<std::size_t>(g) * n];
        for (int c = 1; c < n; ++c) {
            const double v = priority[static_cast<std::size_t>(g) * n + c];
            if (v > best_v) {
                best_v = v;
                best = c;
            }
        }
        masks.group_winner[g] = best;
        strength[g] = best_v;  // group strength = its most active cell
    }
    for (int g : top_k_indices(strength, geom.winners)) masks.group_active[g] = 1;
    return masks;
}

Masks topk_masks(const Vector& sigma, const LayerGeometry& geom) {
    return topk_masks_priority(sigma, sigma, geom);
}

Masks partitioned_topk_priority(const Vector& sigma, const Vector& priority,
                                const LayerGeometry& geom) {
    require(geom.partitions.has_value(), "partitioned_topk: geometry has no partitions");
    require(geom.flattened(), "partitioned_topk: requires a flattened layer");
    require_dim(sigma.size() == static_cast<std::size_t>(geom.cells()) &&
                    priority.size() == sigma.size(),
                "partitioned_topk: shape mismatch");
    check_no_nan(priority, "partitioned_topk");
    const PartitionSpec& parts = *geom.partitions;
    const std::vector<int> budgets = parts.winner_counts(geom.winners);
    Masks masks;
    masks.group_active.assign(geom.cells(), 0);
    masks.group_winner.assign(geom.cells(), 0);
    int start = 0;
    for (std::size_t p = 0; p < parts.blocks.size(); ++p) {
        const int count = parts.blocks[p].cells;
        Vector local(priority.begin() + start, priority.begin() + start + count);
        for (int idx : top_k_indices(local, budgets[p])) masks.group_active[start + idx] = 1;
        start += count;
    }
    return masks;
}

Masks partitioned_topk(const Vector& sigma, const LayerGeometry& geom) {
    return partitioned_topk_priority(sigma, sigma, geom);
}

Vector activate(const Vector& sigma, const Masks& masks, int groups, int cells_per_group) {
    Vector y(sigma.size(), 0.0);
    for (int g = 0; g < groups; ++g) {
        if (!masks.group_active[g]) continue;
        const std::size_t i =
            static_cast<std::size_t>(g) * cells_per_group + masks.group_winner[g];
        y[i] = std::tanh(sigma[i]);
    }
    return y;
}

Vector group_max(const Vector& activation, int groups, int cells_per_group,
                 std::vector<int>* argmax_out) {
    Vector out(groups, 0.0);
    if (argmax_out) argmax_out->assign(groups, 0);
    for (int g = 0; g < groups; ++g) {
        int best = 0;
        double best_v = activation[static_cast<std::size_t>(g) * cells_per_group];
        for (int c = 1; c < cells_per_group; ++c) {
            const double v = activation[static_cast<std::size_t>(g) * cells_per_group + c];
            if (v > best_v) {
                best_v = v;
                best = c;
            }
        }
        out[g] = best_v;
        if (argmax_out) (*argmax_out)[g] = best;
    }
    return out;
}

Vector decode(const Matrix& w_dec, const Vector& group_max_value) {
    return matvec(w_dec, group_max_value);
}

Vector update_memory(const Vector& trace, const Vector& activation, const Vector& decay,
                     std::vector<std::uint8_t>* branch_out) {
    require_dim(trace.size() == activation.size() && trace.size() == decay.size(),
                "update_memory: shape mismatch");
    Vector merged(trace.size(), 0.0);
    if (branch_out) branch_out->assign(trace.size(), 0);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        require(decay[i] >= 0.0 && decay[i] < 1.0, "update_memory: decay must lie in [0, 1)");
        const double decayed = trace[i] * decay[i];
        const double incoming = std::max(activation[i], 0.0);  // trace stays non-negative
        if (decayed >= incoming) {
            merged[i] = decayed;
            if (branch_out) (*branch_out)[i] = 1;
        } else {
            merged[i] = incoming;
        }
    }
    return merged;
}

Vector normalize_recurrent(const Vector& trace) {
    double sum = 0.0;
    for (double v : trace) {
        require(v >= 0.0, "normalize_recurrent: trace must be non-negative");
        sum += v;
    }
    Vector out(trace.size(), 0.0);
    if (sum == 0.0) return out;  // cleared memory contributes nothing
    for (std::size_t i = 0; i < trace.size(); ++i) out[i] = trace[i] / sum;
    return out;
}

void update_duty(Vector& duty, const Vector& indicator, double alpha) {
    require(alpha > 0.0 && alpha < 1.0, "update_duty: alpha must lie in (0, 1)");
    require_dim(duty.size() == indicator.size(), "update_duty: shape mismatch");
    for (std::size_t i = 0; i < duty.size(); ++i) {
        require(indicator[i] >= 0.0 && indicator[i] <= 1.0,
                "update_duty: indicator must lie in [0, 1]");
        duty[i] = (1.0 - alpha) * duty[i] + alpha * indicator[i];
    }
}

void update_duty(Vector& duty, const std::vector<int>& winner_cells, double alpha) {
    Vector indicator(duty.size(), 0.0);
    for (int i : winner_cells) indicator[i] = 1.0;
    update_duty(duty, indicator, alpha);
}

// ---------------------------------------------------------------------------
// RsmLayer
// ---------------------------------------------------------------------------

namespace {
void validate_options(const RsmOptions& opts) {
    require(opts.decay_ceiling > 0.0 && opts.decay_ceiling < 1.0,
            "RsmOptions: decay ceiling must lie in (0, 1)");
    require(opts.fixed_decay >= 0.0 && opts.fixed_decay <= opts.decay_ceiling,
            "RsmOptions: fixed decay must lie in [0, ceiling]");
    require(opts.duty_alpha > 0.0 && opts.duty_alpha < 1.0,
            "RsmOptions: duty alpha must lie in (0, 1)");
    require(opts.boost_strength >= 0.0, "RsmOptions: boost strength must be non-negative");
}
}  // namespace

RsmLayer::RsmLayer(const LayerGeometry& geom, const RsmOptions& opts, Rng& rng)
    : geom_(geom), opts_(opts) {
    geom_.validate();
    validate_options(opts_);
    weights_.w_ff = init_weights(geom.groups, geom.input_dim, InitScheme::UniformScaled, rng);
    weights_.w_rec = init_weights(geom.cells(), geom.cells(), InitScheme::UniformScaled, rng);
    weights_.w_dec = init_weights(geom.input_dim, geom.groups, InitScheme::UniformScaled, rng);
    if (opts.trainable_decay) weights_.decay_logits.assign(geom.cells(), opts.initial_decay_logit);
    duty_.assign(geom.cells(), 0.0);
    beta_ = (opts.strategy == UtilizationStrategy::Boosting) ? opts.boost_strength : 0.0;
    inhibition_.assign(geom.cells(), 0.0);
}

RsmLayer::RsmLayer(LayerGeometry geom, RsmOptions opts, LayerWeights weights)
    : geom_(std::move(geom)), opts_(std::move(opts)), weights_(std::move(weights)) {
    geom_.validate();
    validate_options(opts_);
    weights_.validate(geom_);
    duty_.assign(geom_.cells(), 0.0);
    beta_ = (opts_.strategy == UtilizationStrategy::Boosting) ? opts_.boost_strength : 0.0;
    inhibition_.assign(geom_.cells(), 0.0);
}

Vector RsmLayer::effective_decay() const {
    const int cells = geom_.cells();
    Vector decay(cells, opts_.fixed_decay);
    if (opts_.trainable_decay) {
        for (int i = 0; i < cells; ++i) {
            const double s = 1.0 / (1.0 + std::exp(-weights_.decay_logits[i]));
            decay[i] = std::min(s, opts_.decay_ceiling);
        }
    }
    return decay;
}

StepOutput RsmLayer::forward(const Vector& input, LayerState& state, bool update_stats) {
    require_dim(input.size() == static_cast<std::size_t>(geom_.input_dim),
                "RsmLayer::forward: input dimension mismatch");
    check_no_nan(input, "RsmLayer::forward input");

    StepOutput out;
    out.input = input;
    out.mem_prev_trace = state.prev_trace;
    out.mem_prev_output = state.prev_output;
    out.mem_decay = effective_decay();
    if (opts_.trainable_decay) {
        out.decay_clamped.assign(geom_.cells(), 0);
        for (int i = 0; i < geom_.cells(); ++i) {
            const double s = 1.0 / (1.0 + std::exp(-weights_.decay_logits[i]));
            out.decay_clamped[i] = s >= opts_.decay_ceiling ? 1 : 0;
        }
    }

    // Rebuild the recurrent input from retained history so the decay
    // parameter receives a gradient from this step only.
    const Vector merged =
        update_memory(state.prev_trace, state.prev_output, out.mem_decay, &out.mem_from_decay);
    out.mem_sum = 0.0;
    for (double v : merged) out.mem_sum += v;
    out.rec_input = normalize_recurrent(merged);

    out.ff_sum = ff_contribution(weights_.w_ff, input);
    out.rec_sum = rec_contribution(weights_.w_rec, out.rec_input);

    const double a_hat = geom_.expected_sparseness();
    out.boost = (opts_.strategy == UtilizationStrategy::Boosting)
                    ? compute_boost(duty_, beta_, a_hat)
                    : Vector(geom_.cells(), 1.0);

    out.sigma = geom_.partitions
                    ? combine_boost_partitioned(out.ff_sum, out.rec_sum, out.boost,
                                                *geom_.partitions)
                    : combine_boost(out.ff_sum, out.rec_sum, out.boost, geom_.groups,
                                    geom_.cells_per_group);

    if (opts_.strategy == UtilizationStrategy::Inhibition) {
        Vector priority = out.sigma;
        for (std::size_t i = 0; i < priority.size(); ++i)
            priority[i] -= opts_.inhibition_strength * inhibition_[i];
        out.masks = geom_.partitions ? partitioned_topk_priority(out.sigma, priority, geom_)
                                     : topk_masks_priority(out.sigma, priority, geom_);
    } else {
        out.masks = geom_.partitions ? partitioned_topk(out.sigma, geom_)
                                     : topk_masks(out.sigma, geom_);
    }

    out.activation = activate(out.sigma, out.masks, geom_.groups, geom_.cells_per_group);
    out.group_max_value =
        group_max(out.activation, geom_.groups, geom_.cells_per_group, &out.group_max_cell);
    out.prediction = decode(weights_.w_dec, out.group_max_value);

    out.winner_cells.clear();
    for (int g = 0; g < geom_.groups; ++g)
        if (out.masks.group_active[g])
            out.winner_cells.push_back(g * geom_.cells_per_group + out.masks.group_winner[g]);

    // Advance the per-sequence state.
    state.prev_trace = merged;
    state.trace = merged;
    state.rec_input = out.rec_input;
    for (int i = 0; i < geom_.cells(); ++i)
        state.prev_output[i] = std::max(out.activation[i], 0.0);

    if (update_stats) {
        Vector indicator(geom_.cells(), 0.0);
        for (int i : out.winner_cells) indicator[i] = 1.0;
        update_stats_from(indicator);
    }
    return out;
}

void RsmLayer::update_stats(const Vector& mean_indicator) { update_stats_from(mean_indicator); }

void RsmLayer::update_stats_from(const Vector& indicator) {
    update_duty(duty_, indicator, opts_.duty_alpha);
    if (opts_.strategy == UtilizationStrategy::Inhibition) {
        for (std::size_t i = 0; i < inhibition_.size(); ++i)
            inhibition_[i] = std::max(inhibition_[i] * opts_.inhibition_decay, indicator[i]);
    }
}

}  // namespace brsm
