#pragma once

#include "brsm/core.hpp"
#include "brsm/linalg.hpp"

namespace brsm {

// Mean squared error; the training target is the next input in the stream.
double mse_loss(const Vector& prediction, const Vector& target);

// d(mse)/d(prediction) = 2 (prediction - target) / len
Vector mse_loss_grad(const Vector& prediction, const Vector& target);

struct Gradients {
    Matrix w_ff;
    Matrix w_rec;
    Matrix w_dec;
    Vector decay_logits;

    static Gradients zeros(const LayerGeometry& geom, bool trainable_decay);
    void add(const Gradients& other);
    void scale(double s);
};

// Exact gradients of one step's loss with respect to the layer parameters.
// Credit assignment is local in time: the retained step output is the whole
// computational graph, masks and boost terms are constants, and the previous
// trace/activation enter as constants so only the decay logits see the
// recurrent path.
Gradients backward_step(const StepOutput& step, const LayerWeights& weights,
                        const LayerGeometry& geom, const Vector& loss_grad,
                        double decoder_l2 = 0.0);

// ---------------------------------------------------------------------------
// Optimizer: adaptive moments with bias correction
// ---------------------------------------------------------------------------

struct AdamConfig {
    double learning_rate = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Moments for one parameter tensor (stored flat).
struct AdamSlot {
    Vector m;
    Vector v;

    static AdamSlot zeros(std::size_t size);
};

class AdamState {
  public:
    AdamState() = default;
    AdamState(const AdamConfig& cfg, std::vector<std::size_t> tensor_sizes);

    const AdamConfig& config() const { return cfg_; }
    long step_count() const { return steps_; }
    std::vector<AdamSlot>& slots() { return slots_; }
    const std::vector<AdamSlot>& slots() const { return slots_; }

    // Advance the shared step counter once per batch, then apply per tensor.
    void begin_step() { ++steps_; }
    void apply(std::size_t slot, double* params, const double* grads, std::size_t size);
    void apply(std::size_t slot, Matrix& params, const Matrix& grads);
    void apply(std::size_t slot, Vector& params, const Vector& grads);

  private:
    AdamConfig cfg_;
    long steps_ = 0;
    std::vector<AdamSlot> slots_;
};

// beta' = beta * factor at epoch boundaries, otherwise unchanged.
double boost_schedule(double beta, double factor, bool epoch_boundary);

// With probability `prob`, clear the sequence state (duty cycles are layer
// statistics and are untouched). Returns true when a clear happened.
bool maybe_forget(LayerState& state, double prob, Rng& rng);

}  // namespace brsm
