#include "brsm/learning.hpp"

#include <cmath>

namespace brsm {

double mse_loss(const Vector& prediction, const Vector& target) {
    require_dim(prediction.size() == target.size(), "mse_loss: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        const double d = prediction[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(prediction.size());
}

Vector mse_loss_grad(const Vector& prediction, const Vector& target) {
    require_dim(prediction.size() == target.size(), "mse_loss_grad: length mismatch");
    Vector grad(prediction.size(), 0.0);
    const double scale = 2.0 / static_cast<double>(prediction.size());
    for (std::size_t i = 0; i < prediction.size(); ++i)
        grad[i] = scale * (prediction[i] - target[i]);
    return grad;
}

Gradients Gradients::zeros(const LayerGeometry& geom, bool trainable_decay) {
    Gradients g;
    g.w_ff = Matrix(geom.groups, geom.input_dim);
    g.w_rec = Matrix(geom.cells(), geom.cells());
    g.w_dec = Matrix(geom.input_dim, geom.groups);
    if (trainable_decay) g.decay_logits.assign(geom.cells(), 0.0);
    return g;
}

void Gradients::add(const Gradients& other) {
    require_dim(w_ff.same_shape(other.w_ff) && w_rec.same_shape(other.w_rec) &&
                    w_dec.same_shape(other.w_dec) &&
                    decay_logits.size() == other.decay_logits.size(),
                "Gradients::add: shape mismatch");
    for (std::size_t i = 0; i < w_ff.size(); ++i) w_ff.data()[i] += other.w_ff.data()[i];
    for (std::size_t i = 0; i < w_rec.size(); ++i) w_rec.data()[i] += other.w_rec.data()[i];
    for (std::size_t i = 0; i < w_dec.size(); ++i) w_dec.data()[i] += other.w_dec.data()[i];
    for (std::size_t i = 0; i < decay_logits.size(); ++i) decay_logits[i] += other.decay_logits[i];
}

void Gradients::scale(double s) {
    for (double& x : w_ff.data()) x *= s;
    for (double& x : w_rec.data()) x *= s;
    for (double& x : w_dec.data()) x *= s;
    for (double& x : decay_logits) x *= s;
}

Gradients backward_step(const StepOutput& step, const LayerWeights& weights,
                        const LayerGeometry& geom, const Vector& loss_grad, double decoder_l2) {
    require_dim(loss_grad.size() == static_cast<std::size_t>(geom.input_dim),
                "backward_step: loss gradient dimension mismatch");
    require(!step.sigma.empty(), "backward_step: step output has no retained intermediates");

    const int m = geom.groups;
    const int n = geom.cells_per_group;
    const bool trainable_decay = !weights.decay_logits.empty();
    Gradients grads = Gradients::zeros(geom, trainable_decay);

    // Decoder: prediction = w_dec y^lambda, so d w_dec = outer(g, y^lambda).
    add_outer(grads.w_dec, loss_grad, step.group_max_value);
    if (decoder_l2 > 0.0) {
        for (std::size_t i = 0; i < grads.w_dec.size(); ++i)
            grads.w_dec.data()[i] += decoder_l2 * weights.w_dec.data()[i];
    }

    // Through the group max: the gradient lands on each group's argmax cell,
    // and survives only if that cell is one the masks let through (a
    // masked-out cell is constant zero).
    const Vector d_group = matvec_transpose(weights.w_dec, loss_grad);  // length m
    Vector d_sigma(step.sigma.size(), 0.0);
    for (int g = 0; g < m; ++g) {
        const int src = step.group_max_cell[g];
        if (!step.masks.group_active[g] || step.masks.group_winner[g] != src) continue;
        const std::size_t flat = static_cast<std::size_t>(g) * n + src;
        const double y = step.activation[flat];
        d_sigma[flat] = d_group[g] * (1.0 - y * y);  // tanh'
    }

    // Split into the feed-forward and recurrent pre-activations. Boost terms
    // are constants by construction.
    Vector d_ff(m, 0.0);
    Vector d_rec(step.sigma.size(), 0.0);
    if (geom.partitions) {
        std::size_t i = 0;
        for (const auto& block : geom.partitions->blocks) {
            for (int c = 0; c < block.cells; ++c, ++i) {
                const double d = d_sigma[i] * step.boost[i];
                if (d == 0.0) continue;
                switch (block.kind) {
                    case PartitionKind::FeedForwardOnly: d_ff[i] += d; break;
                    case PartitionKind::RecurrentOnly: d_rec[i] += d; break;
                    case PartitionKind::Integrated:
                        d_ff[i] += d;
                        d_rec[i] += d;
                        break;
                }
            }
        }
    } else {
        for (int g = 0; g < m; ++g) {
            for (int c = 0; c < n; ++c) {
                const std::size_t flat = static_cast<std::size_t>(g) * n + c;
                const double d = d_sigma[flat] * step.boost[flat];
                if (d == 0.0) continue;
                d_ff[g] += d;
                d_rec[flat] += d;
            }
        }
    }

    add_outer(grads.w_ff, d_ff, step.input);
    add_outer(grads.w_rec, d_rec, step.rec_input);

    if (trainable_decay && step.mem_sum > 0.0) {
        // d loss / d x^B, then through the normalization and the max-merge.
        // Only cells whose merge kept the decayed branch pass a gradient to
        // the decay logits; history itself is a constant.
        const Vector d_rec_input = matvec_transpose(weights.w_rec, d_rec);
        const double projected = dot(d_rec_input, step.rec_input);
        for (int i = 0; i < geom.cells(); ++i) {
            if (!step.mem_from_decay[i] || step.decay_clamped[i]) continue;
            const double d_trace = (d_rec_input[i] - projected) / step.mem_sum;
            const double s = 1.0 / (1.0 + std::exp(-weights.decay_logits[i]));
            grads.decay_logits[i] = d_trace * step.mem_prev_trace[i] * s * (1.0 - s);
        }
    }

    return grads;
}

AdamSlot AdamSlot::zeros(std::size_t size) {
    AdamSlot s;
    s.m.assign(size, 0.0);
    s.v.assign(size, 0.0);
    return s;
}

AdamState::AdamState(const AdamConfig& cfg, std::vector<std::size_t> tensor_sizes) : cfg_(cfg) {
    slots_.reserve(tensor_sizes.size());
    for (std::size_t sz : tensor_sizes) slots_.push_back(AdamSlot::zeros(sz));
}

void AdamState::apply(std::size_t slot, double* params, const double* grads, std::size_t size) {
    require(slot < slots_.size(), "AdamState::apply: no such slot");
    require(steps_ > 0, "AdamState::apply: call begin_step first");
    AdamSlot& s = slots_[slot];
    require_dim(s.m.size() == size, "AdamState::apply: tensor size mismatch");
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < size; ++i) {
        const double g = grads[i];
        s.m[i] = b1 * s.m[i] + (1.0 - b1) * g;
        s.v[i] = b2 * s.v[i] + (1.0 - b2) * g * g;
        const double m_hat = s.m[i] / corr1;
        const double v_hat = s.v[i] / corr2;
        params[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
}

void AdamState::apply(std::size_t slot, Matrix& params, const Matrix& grads) {
    require_dim(params.same_shape(grads), "AdamState::apply: matrix shape mismatch");
    apply(slot, params.data().data(), grads.data().data(), params.size());
}

void AdamState::apply(std::size_t slot, Vector& params, const Vector& grads) {
    require_dim(params.size() == grads.size(), "AdamState::apply: vector size mismatch");
    apply(slot, params.data(), grads.data(), params.size());
}

double boost_schedule(double beta, double factor, bool epoch_boundary) {
    require(factor > 0.0 && factor <= 1.0, "boost_schedule: factor must lie in (0, 1]");
    return epoch_boundary ? beta * factor : beta;
}

bool maybe_forget(LayerState& state, double prob, Rng& rng) {
    require(prob >= 0.0 && prob <= 1.0, "maybe_forget: probability must lie in [0, 1]");
    if (prob <= 0.0) return false;
    if (rng.uniform() < prob) {
        state.clear();
        return true;
    }
    return false;
}

}  // namespace brsm
