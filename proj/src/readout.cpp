#include "brsm/readout.hpp"

#include <cmath>

namespace brsm {

Classifier::Classifier(const ClassifierConfig& cfg, Rng& rng) : cfg_(cfg) {
    require(cfg.input_dim >= 1 && cfg.hidden_dim >= 1 && cfg.output_dim >= 1,
            "Classifier: dimensions must be >= 1");
    require(cfg.leaky_slope >= 0.0 && cfg.leaky_slope < 1.0,
            "Classifier: leaky slope must lie in [0, 1)");
    w1_ = init_weights(cfg.hidden_dim, cfg.input_dim, InitScheme::UniformScaled, rng);
    b1_.assign(cfg.hidden_dim, 0.0);
    w2_ = init_weights(cfg.output_dim, cfg.hidden_dim, InitScheme::UniformScaled, rng);
    b2_.assign(cfg.output_dim, 0.0);
}

Classifier::Forward Classifier::forward(const Vector& input) const {
    require_dim(input.size() == static_cast<std::size_t>(cfg_.input_dim),
                "Classifier::forward: input dimension mismatch");
    Forward fwd;
    fwd.input = input;
    fwd.hidden_pre = matvec(w1_, input);
    for (int i = 0; i < cfg_.hidden_dim; ++i) fwd.hidden_pre[i] += b1_[i];
    fwd.hidden.resize(cfg_.hidden_dim);
    for (int i = 0; i < cfg_.hidden_dim; ++i) {
        const double x = fwd.hidden_pre[i];
        fwd.hidden[i] = x > 0.0 ? x : cfg_.leaky_slope * x;
    }
    fwd.logits = matvec(w2_, fwd.hidden);
    for (int i = 0; i < cfg_.output_dim; ++i) fwd.logits[i] += b2_[i];
    fwd.probs = softmax(fwd.logits);
    return fwd;
}

Vector Classifier::softmax(const Vector& logits) {
    require(!logits.empty(), "softmax: empty input");
    double max_v = logits[0];
    for (double x : logits) max_v = std::max(max_v, x);
    Vector probs(logits.size(), 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - max_v);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

Classifier::Grads Classifier::Grads::zeros(const ClassifierConfig& cfg) {
    Grads g;
    g.w1 = Matrix(cfg.hidden_dim, cfg.input_dim);
    g.b1.assign(cfg.hidden_dim, 0.0);
    g.w2 = Matrix(cfg.output_dim, cfg.hidden_dim);
    g.b2.assign(cfg.output_dim, 0.0);
    return g;
}

void Classifier::Grads::add(const Grads& other) {
    for (std::size_t i = 0; i < w1.size(); ++i) w1.data()[i] += other.w1.data()[i];
    for (std::size_t i = 0; i < b1.size(); ++i) b1[i] += other.b1[i];
    for (std::size_t i = 0; i < w2.size(); ++i) w2.data()[i] += other.w2.data()[i];
    for (std::size_t i = 0; i < b2.size(); ++i) b2[i] += other.b2[i];
}

void Classifier::Grads::scale(double s) {
    for (double& x : w1.data()) x *= s;
    for (double& x : b1) x *= s;
    for (double& x : w2.data()) x *= s;
    for (double& x : b2) x *= s;
}

double Classifier::cross_entropy(const Forward& fwd, int label) const {
    require(label >= 0 && label < cfg_.output_dim, "Classifier: label out of range");
    return -std::log(std::max(fwd.probs[label], 1e-300));
}

Classifier::Grads Classifier::backward(const Forward& fwd, int label) const {
    require(label >= 0 && label < cfg_.output_dim, "Classifier: label out of range");
    Grads grads = Grads::zeros(cfg_);
    // softmax + cross-entropy: d logits = probs - onehot(label)
    Vector d_logits = fwd.probs;
    d_logits[label] -= 1.0;
    add_outer(grads.w2, d_logits, fwd.hidden);
    grads.b2 = d_logits;
    Vector d_hidden = matvec_transpose(w2_, d_logits);
    for (int i = 0; i < cfg_.hidden_dim; ++i)
        d_hidden[i] *= fwd.hidden_pre[i] > 0.0 ? 1.0 : cfg_.leaky_slope;
    add_outer(grads.w1, d_hidden, fwd.input);
    grads.b1 = d_hidden;
    return grads;
}

std::vector<std::size_t> Classifier::tensor_sizes() const {
    return {w1_.size(), b1_.size(), w2_.size(), b2_.size()};
}

void Classifier::apply_update(AdamState& adam, const Grads& grads) {
    adam.apply(0, w1_, grads.w1);
    adam.apply(1, b1_, grads.b1);
    adam.apply(2, w2_, grads.w2);
    adam.apply(3, b2_, grads.b2);
}

double classifier_train_step(Classifier& net, AdamState& adam, const Vector& input, int label) {
    const Classifier::Forward fwd = net.forward(input);
    const double loss = net.cross_entropy(fwd, label);
    const Classifier::Grads grads = net.backward(fwd, label);
    adam.begin_step();
    net.apply_update(adam, grads);
    return loss;
}

WordCache::WordCache(int vocab_size, double decay_rate) : decay_(decay_rate) {
    require(vocab_size >= 1, "WordCache: vocabulary must be non-empty");
    require(decay_rate >= 0.0 && decay_rate <= 1.0, "WordCache: decay must lie in [0, 1]");
    scores_.assign(vocab_size, 0.0);
}

void WordCache::observe(int token) {
    require(token >= 0 && token < vocab_size(), "WordCache: token out of vocabulary");
    for (double& s : scores_) s *= decay_;
    scores_[token] = 1.0;
}

void WordCache::reset() { std::fill(scores_.begin(), scores_.end(), 0.0); }

void MixWeights::validate() const {
    require(uniform_mass >= 0.0 && cache_weight >= 0.0 && model_weight() >= 0.0,
            "MixWeights: weights must be non-negative and sum to at most 1");
}

Vector mix_distributions(const Vector& model_dist, const WordCache& cache,
                         const MixWeights& mix) {
    mix.validate();
    const std::size_t v = model_dist.size();
    require_dim(v == static_cast<std::size_t>(cache.vocab_size()),
                "mix_distributions: vocabulary size mismatch");
    double cache_sum = 0.0;
    for (double s : cache.scores()) cache_sum += s;
    const double uniform = 1.0 / static_cast<double>(v);
    Vector out(v, 0.0);
    const double wm = mix.model_weight(), wc = mix.cache_weight, wu = mix.uniform_mass;
    for (std::size_t i = 0; i < v; ++i) {
        const double cache_p = cache_sum > 0.0 ? cache.scores()[i] / cache_sum : uniform;
        out[i] = wm * model_dist[i] + wc * cache_p + wu * uniform;
    }
    return out;
}

}  // namespace brsm
