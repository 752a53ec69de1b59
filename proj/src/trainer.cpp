#include "brsm/trainer.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace brsm {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream_id) {
    // splitmix64 over base + golden-ratio stride
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream_id + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

int argmax(const Vector& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

void backward_accumulate(Gradients& acc, const StepOutput& step, const LayerWeights& weights,
                         const LayerGeometry& geom, const Vector& loss_grad, double decoder_l2) {
    acc.add(backward_step(step, weights, geom, loss_grad, decoder_l2));
}

namespace {

constexpr std::uint64_t kStreamModelInit = 1;
constexpr std::uint64_t kStreamClassifierInit = 2;
constexpr std::uint64_t kStreamMaster = 3;
constexpr std::uint64_t kStreamLaneBase = 1'000'000;
constexpr std::uint64_t kStreamObserve = 2'000'000;
constexpr std::uint64_t kStreamForget = 3'000'000;
constexpr std::uint64_t kStreamEval = 4'000'000;

std::vector<std::size_t> rsm_tensor_sizes(const LayerGeometry& geom, bool trainable_decay) {
    std::vector<std::size_t> sizes = {
        static_cast<std::size_t>(geom.groups) * geom.input_dim,
        static_cast<std::size_t>(geom.cells()) * geom.cells(),
        static_cast<std::size_t>(geom.input_dim) * geom.groups,
    };
    if (trainable_decay) sizes.push_back(static_cast<std::size_t>(geom.cells()));
    return sizes;
}

void apply_rsm_update(RsmLayer& layer, AdamState& adam, const Gradients& grads) {
    adam.begin_step();
    adam.apply(0, layer.weights().w_ff, grads.w_ff);
    adam.apply(1, layer.weights().w_rec, grads.w_rec);
    adam.apply(2, layer.weights().w_dec, grads.w_dec);
    if (!grads.decay_logits.empty()) adam.apply(3, layer.weights().decay_logits, grads.decay_logits);
}

// Empirical firing-rate entropy over an evaluation window.
double window_entropy(const Vector& win_counts, long steps) {
    if (steps <= 0) return 0.0;
    double total = 0.0;
    for (double c : win_counts) total += binary_entropy(c / static_cast<double>(steps));
    return total;
}

}  // namespace

// ---------------------------------------------------------------------------
// SsmnistHarness
// ---------------------------------------------------------------------------

SsmnistHarness::SsmnistHarness(const RunConfig& cfg, GrammarSpec grammar, ImagePool pool,
                               std::optional<ImagePool> eval_pool)
    : cfg_(cfg),
      grammar_(std::move(grammar)),
      pool_(std::move(pool)),
      eval_pool_(std::move(eval_pool)),
      mode_(cfg.observation == "fixed" ? ObserveMode::Fixed : ObserveMode::Random),
      master_rng_(derive_seed(cfg.seed, kStreamMaster)) {
    cfg_.validate();
    grammar_.validate();
    if (eval_pool_)
        require_dim(eval_pool_->dim() == pool_.dim(), "SsmnistHarness: pool dimension mismatch");
    const LayerGeometry geom = cfg_.to_geometry(pool_.dim());
    Rng model_rng(derive_seed(cfg_.seed, kStreamModelInit));
    layer_ = std::make_unique<RsmLayer>(geom, cfg_.to_rsm_options(), model_rng);
    ClassifierConfig ccfg;
    ccfg.input_dim = geom.cells();
    ccfg.hidden_dim = cfg_.classifier_hidden;
    ccfg.output_dim = grammar_.alphabet;
    Rng cls_rng(derive_seed(cfg_.seed, kStreamClassifierInit));
    classifier_ = std::make_unique<Classifier>(ccfg, cls_rng);
    rsm_adam_ = AdamState(cfg_.to_adam_config(), rsm_tensor_sizes(geom, cfg_.trainable_decay));
    cls_adam_ = AdamState(cfg_.to_classifier_adam_config(), classifier_->tensor_sizes());
    make_lanes();
}

void SsmnistHarness::make_lanes() {
    lanes_.clear();
    for (int i = 0; i < cfg_.batch_size; ++i) {
        Lane lane{GrammarStream(grammar_, derive_seed(cfg_.seed, kStreamLaneBase + i)),
                  Rng(derive_seed(cfg_.seed, kStreamObserve + i)),
                  Rng(derive_seed(cfg_.seed, kStreamForget + i)),
                  layer_->make_state(),
                  0,
                  {}};
        lane.current_label = lane.stream.next();
        lane.current_obs = pool_.observe(lane.current_label, mode_, lane.observe_rng);
        lanes_.push_back(std::move(lane));
    }
}

Vector SsmnistHarness::classifier_input(const StepOutput& out, const LayerState& state) const {
    if (cfg_.classifier_input == "trace")
        return update_memory(state.prev_trace, out.activation, out.mem_decay);
    return out.activation;
}

TrainSummary SsmnistHarness::train(MetricWriter* metrics, std::optional<double> stop_at) {
    const LayerGeometry& geom = layer_->geometry();
    const int batch = cfg_.batch_size;
    const double inv_batch = 1.0 / batch;
    TrainSummary summary;
    double window_loss = 0.0, window_acc = 0.0;
    long window_count = 0;
    const bool frozen_from_start = cfg_.rsm_freeze_step == 0;

    Gradients batch_grads = Gradients::zeros(geom, cfg_.trainable_decay);
    Classifier::Grads cls_grads = Classifier::Grads::zeros(classifier_->config());
    Vector indicator(geom.cells(), 0.0);

    for (step_ = 1; step_ <= cfg_.steps; ++step_) {
        batch_grads.w_ff.fill(0.0);
        batch_grads.w_rec.fill(0.0);
        batch_grads.w_dec.fill(0.0);
        std::fill(batch_grads.decay_logits.begin(), batch_grads.decay_logits.end(), 0.0);
        cls_grads.scale(0.0);
        std::fill(indicator.begin(), indicator.end(), 0.0);
        const bool rsm_frozen =
            frozen_from_start || (cfg_.rsm_freeze_step > 0 && step_ > cfg_.rsm_freeze_step);

        for (Lane& lane : lanes_) {
            const int next_label = lane.stream.next();
            const Vector next_obs = pool_.observe(next_label, mode_, lane.observe_rng);

            const StepOutput out = layer_->forward(lane.current_obs, lane.state, false);
            window_loss += mse_loss(out.prediction, next_obs);
            if (!rsm_frozen)
                backward_accumulate(batch_grads, out, layer_->weights(), geom,
                                    mse_loss_grad(out.prediction, next_obs), cfg_.decoder_l2);

            const Vector hidden = classifier_input(out, lane.state);
            const Classifier::Forward cfwd = classifier_->forward(hidden);
            cls_grads.add(classifier_->backward(cfwd, next_label));
            window_acc += argmax(cfwd.probs) == next_label ? 1.0 : 0.0;

            for (int w : out.winner_cells) indicator[w] += inv_batch;

            maybe_forget(lane.state, cfg_.prob_forget, lane.forget_rng);
            lane.current_label = next_label;
            lane.current_obs = next_obs;
        }
        window_count += batch;

        layer_->update_stats(indicator);
        if (!rsm_frozen) {
            batch_grads.scale(inv_batch);
            apply_rsm_update(*layer_, rsm_adam_, batch_grads);
        }
        cls_grads.scale(inv_batch);
        cls_adam_.begin_step();
        classifier_->apply_update(cls_adam_, cls_grads);

        if (step_ % cfg_.epoch_steps == 0)
            layer_->set_boost_strength(
                boost_schedule(layer_->boost_strength(), cfg_.boost_factor, true));

        const bool last_step = step_ == cfg_.steps;
        std::map<std::string, double> record;  // at most one record per step
        if (step_ % cfg_.metrics_every == 0 || last_step) {
            summary.final_loss = window_loss / window_count;
            record["train_mse"] = summary.final_loss;
            record["train_acc"] = window_acc / window_count;
            record["boost_strength"] = layer_->boost_strength();
            record["duty_entropy"] = layer_entropy(layer_->duty());
            window_loss = window_acc = 0.0;
            window_count = 0;
        }
        bool stop = false;
        if (step_ % cfg_.eval_every == 0 || last_step) {
            const SsmnistEval ev =
                evaluate(derive_seed(cfg_.seed, kStreamEval + step_), cfg_.eval_steps);
            record["eval_acc"] = ev.accuracy;
            record["eval_entropy"] = ev.entropy;
            summary.final_eval = ev.accuracy;
            summary.best_eval = std::max(summary.best_eval, ev.accuracy);
            if (stop_at && ev.accuracy >= *stop_at) {
                if (summary.reached_target_at < 0) summary.reached_target_at = step_;
                stop = true;
            }
        }
        if (metrics && !record.empty()) metrics->emit(step_, record);
        if (stop) break;
    }
    summary.steps_run = std::min(step_, cfg_.steps);
    summary.final_train_entropy = layer_entropy(layer_->duty());
    return summary;
}

SsmnistEval SsmnistHarness::evaluate(std::uint64_t eval_seed, int steps) {
    const ImagePool& pool = eval_pool_ ? *eval_pool_ : pool_;
    GrammarStream stream(grammar_, derive_seed(eval_seed, 0));
    Rng obs_rng(derive_seed(eval_seed, 1));
    LayerState state = layer_->make_state();
    int current_label = stream.next();
    Vector current_obs = pool.observe(current_label, mode_, obs_rng);
    long correct = 0;
    Vector win_counts(layer_->geometry().cells(), 0.0);
    for (int t = 0; t < steps; ++t) {
        const int next_label = stream.next();
        const StepOutput out = layer_->forward(current_obs, state, false);
        const Classifier::Forward cfwd = classifier_->forward(classifier_input(out, state));
        if (argmax(cfwd.probs) == next_label) ++correct;
        for (int w : out.winner_cells) win_counts[w] += 1.0;
        current_label = next_label;
        current_obs = pool.observe(next_label, mode_, obs_rng);
    }
    SsmnistEval ev;
    ev.steps = steps;
    ev.accuracy = static_cast<double>(correct) / steps;
    ev.entropy = window_entropy(win_counts, steps);
    return ev;
}

CheckpointData SsmnistHarness::snapshot() const {
    CheckpointData data;
    data.task = TaskKind::Ssmnist;
    data.config_text = dump_config(cfg_);
    data.weights = layer_->weights();
    data.duty = layer_->duty();
    data.beta = layer_->boost_strength();
    data.inhibition = layer_->inhibition_trace();
    data.rsm_adam = AdamSnapshot{rsm_adam_.step_count(), rsm_adam_.slots()};
    data.classifier = ClassifierSnapshot{classifier_->config().input_dim,
                                         classifier_->config().hidden_dim,
                                         classifier_->config().output_dim,
                                         classifier_->w1(),
                                         classifier_->b1(),
                                         classifier_->w2(),
                                         classifier_->b2(),
                                         AdamSnapshot{cls_adam_.step_count(), cls_adam_.slots()}};
    data.rng_states.push_back(master_rng_.serialize());
    return data;
}

void SsmnistHarness::restore(const CheckpointData& data) {
    require(data.task == TaskKind::Ssmnist, "checkpoint: task mismatch (expected ssmnist)");
    data.weights.validate(layer_->geometry());
    layer_->weights() = data.weights;
    require_dim(data.duty.size() == layer_->duty().size(), "checkpoint: duty size mismatch");
    layer_->duty() = data.duty;
    layer_->set_boost_strength(data.beta);
    layer_->inhibition_trace() = data.inhibition;
    require_dim(data.classifier.input_dim == classifier_->config().input_dim &&
                    data.classifier.hidden_dim == classifier_->config().hidden_dim &&
                    data.classifier.output_dim == classifier_->config().output_dim,
                "checkpoint: classifier shape mismatch");
    classifier_->w1() = data.classifier.w1;
    classifier_->b1() = data.classifier.b1;
    classifier_->w2() = data.classifier.w2;
    classifier_->b2() = data.classifier.b2;
}

// ---------------------------------------------------------------------------
// EmbeddingProvider
// ---------------------------------------------------------------------------

EmbeddingProvider EmbeddingProvider::synthetic(int vocab_size) {
    EmbeddingProvider p;
    p.dim_ = kSyntheticEmbeddingDim;
    p.vectors_.reserve(vocab_size);
    for (int i = 0; i < vocab_size; ++i) p.vectors_.push_back(synthetic_embedding(i, vocab_size));
    return p;
}

EmbeddingProvider EmbeddingProvider::from_table(const EmbeddingTable& table,
                                                const Vocabulary& vocab) {
    EmbeddingProvider p;
    p.dim_ = table.dim;
    p.vectors_.reserve(vocab.size());
    for (const std::string& word : vocab.words) p.vectors_.push_back(table.vector_for(word));
    return p;
}

EmbeddingProvider EmbeddingProvider::from_vectors(std::vector<Vector> vectors) {
    EmbeddingProvider p;
    require(!vectors.empty(), "EmbeddingProvider: no vectors");
    p.dim_ = static_cast<int>(vectors[0].size());
    for (const Vector& v : vectors)
        require_dim(v.size() == static_cast<std::size_t>(p.dim_),
                    "EmbeddingProvider: inconsistent dimensions");
    p.vectors_ = std::move(vectors);
    return p;
}

const Vector& EmbeddingProvider::embed(int index) const {
    require(index >= 0 && index < vocab_size(), "EmbeddingProvider: index out of range");
    return vectors_[index];
}

double unigram_perplexity(const std::vector<int>& train_stream,
                          const std::vector<int>& eval_stream, int vocab_size,
                          double uniform_mass) {
    require(vocab_size >= 1, "unigram_perplexity: empty vocabulary");
    require(!train_stream.empty() && !eval_stream.empty(),
            "unigram_perplexity: empty streams");
    Vector counts(vocab_size, 0.0);
    for (int t : train_stream) counts[t] += 1.0;
    const double total = static_cast<double>(train_stream.size());
    const double uniform = 1.0 / vocab_size;
    std::vector<double> log_probs;
    log_probs.reserve(eval_stream.size());
    for (int t : eval_stream) {
        const double p = (1.0 - uniform_mass) * (counts[t] / total) + uniform_mass * uniform;
        log_probs.push_back(std::log(p));
    }
    return perplexity(log_probs);
}

// ---------------------------------------------------------------------------
// LmHarness
// ---------------------------------------------------------------------------

LmHarness::LmHarness(const RunConfig& cfg, Vocabulary vocab, std::vector<int> train_stream,
                     std::vector<int> valid_stream, std::vector<int> test_stream,
                     EmbeddingProvider embedding)
    : cfg_(cfg),
      vocab_(std::move(vocab)),
      train_(std::move(train_stream)),
      valid_(std::move(valid_stream)),
      test_(std::move(test_stream)),
      embedding_(std::move(embedding)),
      master_rng_(derive_seed(cfg.seed, kStreamMaster)) {
    cfg_.validate();
    require(train_.size() >= 2, "LmHarness: training stream too short");
    require(embedding_.vocab_size() >= vocab_.size(), "LmHarness: embedding misses words");
    const LayerGeometry geom = cfg_.to_geometry(embedding_.dim());
    Rng model_rng(derive_seed(cfg_.seed, kStreamModelInit));
    layer_ = std::make_unique<RsmLayer>(geom, cfg_.to_rsm_options(), model_rng);
    ClassifierConfig ccfg;
    ccfg.input_dim = geom.cells();
    ccfg.hidden_dim = cfg_.classifier_hidden;
    ccfg.output_dim = vocab_.size();
    Rng cls_rng(derive_seed(cfg_.seed, kStreamClassifierInit));
    classifier_ = std::make_unique<Classifier>(ccfg, cls_rng);
    rsm_adam_ = AdamState(cfg_.to_adam_config(), rsm_tensor_sizes(geom, cfg_.trainable_decay));
    cls_adam_ = AdamState(cfg_.to_classifier_adam_config(), classifier_->tensor_sizes());
    make_lanes();
}

void LmHarness::make_lanes() {
    lanes_.clear();
    const std::size_t usable = train_.size() - 1;
    for (int i = 0; i < cfg_.batch_size; ++i) {
        Lane lane{(usable * static_cast<std::size_t>(i)) / cfg_.batch_size,
                  Rng(derive_seed(cfg_.seed, kStreamForget + i)), layer_->make_state()};
        lanes_.push_back(std::move(lane));
    }
}

Vector LmHarness::classifier_input(const StepOutput& out, const LayerState& state) const {
    if (cfg_.classifier_input == "trace")
        return update_memory(state.prev_trace, out.activation, out.mem_decay);
    return out.activation;
}

TrainSummary LmHarness::train(MetricWriter* metrics, std::optional<double> stop_at) {
    const LayerGeometry& geom = layer_->geometry();
    const int batch = cfg_.batch_size;
    const double inv_batch = 1.0 / batch;
    TrainSummary summary;
    summary.best_eval = std::numeric_limits<double>::infinity();
    summary.final_eval = std::numeric_limits<double>::infinity();
    double window_mse = 0.0, window_ce = 0.0;
    long window_count = 0;
    const bool frozen_from_start = cfg_.rsm_freeze_step == 0;
    const std::size_t usable = train_.size() - 1;

    Gradients batch_grads = Gradients::zeros(geom, cfg_.trainable_decay);
    Classifier::Grads cls_grads = Classifier::Grads::zeros(classifier_->config());
    Vector indicator(geom.cells(), 0.0);
    const std::vector<int>& periodic_eval = valid_.size() >= 2 ? valid_ : test_;

    for (step_ = 1; step_ <= cfg_.steps; ++step_) {
        batch_grads.w_ff.fill(0.0);
        batch_grads.w_rec.fill(0.0);
        batch_grads.w_dec.fill(0.0);
        std::fill(batch_grads.decay_logits.begin(), batch_grads.decay_logits.end(), 0.0);
        cls_grads.scale(0.0);
        std::fill(indicator.begin(), indicator.end(), 0.0);
        const bool rsm_frozen =
            frozen_from_start || (cfg_.rsm_freeze_step > 0 && step_ > cfg_.rsm_freeze_step);

        for (Lane& lane : lanes_) {
            const int current = train_[lane.pos];
            const int next = train_[lane.pos + 1];
            const StepOutput out = layer_->forward(embedding_.embed(current), lane.state, false);
            const Vector& target = embedding_.embed(next);
            window_mse += mse_loss(out.prediction, target);
            if (!rsm_frozen)
                backward_accumulate(batch_grads, out, layer_->weights(), geom,
                                    mse_loss_grad(out.prediction, target), cfg_.decoder_l2);

            const Classifier::Forward cfwd = classifier_->forward(classifier_input(out, lane.state));
            window_ce += classifier_->cross_entropy(cfwd, next);
            cls_grads.add(classifier_->backward(cfwd, next));

            for (int w : out.winner_cells) indicator[w] += inv_batch;

            maybe_forget(lane.state, cfg_.prob_forget, lane.forget_rng);
            lane.pos += 1;
            if (lane.pos >= usable) {
                lane.pos = 0;
                lane.state.clear();  // wrap = fresh sequence
            }
        }
        window_count += batch;

        layer_->update_stats(indicator);
        if (!rsm_frozen) {
            batch_grads.scale(inv_batch);
            apply_rsm_update(*layer_, rsm_adam_, batch_grads);
        }
        cls_grads.scale(inv_batch);
        cls_adam_.begin_step();
        classifier_->apply_update(cls_adam_, cls_grads);

        if (step_ % cfg_.epoch_steps == 0)
            layer_->set_boost_strength(
                boost_schedule(layer_->boost_strength(), cfg_.boost_factor, true));

        const bool last_step = step_ == cfg_.steps;
        std::map<std::string, double> record;
        if (step_ % cfg_.metrics_every == 0 || last_step) {
            summary.final_loss = window_mse / window_count;
            record["train_mse"] = summary.final_loss;
            record["train_ce"] = window_ce / window_count;
            record["boost_strength"] = layer_->boost_strength();
            record["duty_entropy"] = layer_entropy(layer_->duty());
            window_mse = window_ce = 0.0;
            window_count = 0;
        }
        bool stop = false;
        if (step_ % cfg_.eval_every == 0 || last_step) {
            const LmEval ev = evaluate(periodic_eval);
            record["eval_ppl"] = ev.perplexity;
            record["eval_entropy"] = ev.entropy;
            summary.final_eval = ev.perplexity;
            summary.best_eval = std::min(summary.best_eval, ev.perplexity);
            if (stop_at && ev.perplexity <= *stop_at) {
                if (summary.reached_target_at < 0) summary.reached_target_at = step_;
                stop = true;
            }
        }
        if (metrics && !record.empty()) metrics->emit(step_, record);
        if (stop) break;
    }
    summary.steps_run = std::min(step_, cfg_.steps);
    summary.final_train_entropy = layer_entropy(layer_->duty());
    return summary;
}

LmEval LmHarness::evaluate(const std::vector<int>& stream) {
    require(stream.size() >= 2, "LmHarness::evaluate: stream too short");
    LayerState state = layer_->make_state();
    WordCache cache(vocab_.size(), cfg_.cache_decay);
    const MixWeights mix = cfg_.to_mix_weights();
    std::vector<double> log_probs;
    log_probs.reserve(stream.size() - 1);
    Vector win_counts(layer_->geometry().cells(), 0.0);
    for (std::size_t t = 0; t + 1 < stream.size(); ++t) {
        const StepOutput out = layer_->forward(embedding_.embed(stream[t]), state, false);
        const Classifier::Forward cfwd = classifier_->forward(classifier_input(out, state));
        cache.observe(stream[t]);
        const Vector mixed = mix_distributions(cfwd.probs, cache, mix);
        log_probs.push_back(std::log(mixed[stream[t + 1]]));
        for (int w : out.winner_cells) win_counts[w] += 1.0;
    }
    LmEval ev;
    ev.tokens = static_cast<long>(log_probs.size());
    ev.perplexity = perplexity(log_probs);
    ev.entropy = window_entropy(win_counts, ev.tokens);
    return ev;
}

double LmHarness::baseline_perplexity(const std::vector<int>& stream) const {
    return unigram_perplexity(train_, stream, vocab_.size(), cfg_.uniform_mass_weight);
}

CheckpointData LmHarness::snapshot() const {
    CheckpointData data;
    data.task = TaskKind::Lm;
    data.config_text = dump_config(cfg_);
    data.weights = layer_->weights();
    data.duty = layer_->duty();
    data.beta = layer_->boost_strength();
    data.inhibition = layer_->inhibition_trace();
    data.rsm_adam = AdamSnapshot{rsm_adam_.step_count(), rsm_adam_.slots()};
    data.classifier = ClassifierSnapshot{classifier_->config().input_dim,
                                         classifier_->config().hidden_dim,
                                         classifier_->config().output_dim,
                                         classifier_->w1(),
                                         classifier_->b1(),
                                         classifier_->w2(),
                                         classifier_->b2(),
                                         AdamSnapshot{cls_adam_.step_count(), cls_adam_.slots()}};
    data.rng_states.push_back(master_rng_.serialize());
    data.vocab_words = vocab_.words;
    data.embedding_dim = embedding_.dim();
    data.embedding_vectors = embedding_.vectors();
    return data;
}

void LmHarness::restore(const CheckpointData& data) {
    require(data.task == TaskKind::Lm, "checkpoint: task mismatch (expected lm)");
    data.weights.validate(layer_->geometry());
    layer_->weights() = data.weights;
    require_dim(data.duty.size() == layer_->duty().size(), "checkpoint: duty size mismatch");
    layer_->duty() = data.duty;
    layer_->set_boost_strength(data.beta);
    layer_->inhibition_trace() = data.inhibition;
    require_dim(data.classifier.input_dim == classifier_->config().input_dim &&
                    data.classifier.hidden_dim == classifier_->config().hidden_dim &&
                    data.classifier.output_dim == classifier_->config().output_dim,
                "checkpoint: classifier shape mismatch");
    classifier_->w1() = data.classifier.w1;
    classifier_->b1() = data.classifier.b1;
    classifier_->w2() = data.classifier.w2;
    classifier_->b2() = data.classifier.b2;
}

}  // namespace brsm
