#include "brsm/runner.hpp"

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <ostream>

#include "brsm/checkpoint.hpp"
#include "brsm/data.hpp"
#include "brsm/metrics.hpp"

namespace brsm {

namespace {

constexpr std::uint64_t kStreamPool = 42'000'000;

std::string default_run_id(const std::string& command, const RunConfig& cfg) {
    return cfg.run_id.empty() ? command + "-seed" + std::to_string(cfg.seed) : cfg.run_id;
}

MetricWriter make_writer(const RunConfig& cfg, const std::string& run_id) {
    return MetricWriter(resolve_data_path(cfg.out_dir), run_id, config_hash(cfg),
                        dump_config(cfg), cfg.metrics_flush_every);
}

std::string checkpoint_path_for(const RunConfig& cfg, const std::string& run_id) {
    return (std::filesystem::path(resolve_data_path(cfg.out_dir)) /
            (run_id + "-" + config_hash(cfg) + ".ckpt"))
        .string();
}

std::vector<int> load_stream(const std::string& path, const Vocabulary& vocab) {
    if (path.empty()) return {};
    return token_stream(read_text_file(resolve_data_path(path)), vocab);
}

}  // namespace

GrammarSpec resolve_grammar(const std::string& spec) {
    if (spec.rfind("builtin:", 0) == 0) {
        const std::string name = spec.substr(8);
        if (name == "paper-8x9") return GrammarSpec::builtin_8x9();
        throw ConfigError("unknown builtin grammar '" + name + "'");
    }
    return GrammarSpec::from_text(read_text_file(resolve_data_path(spec)));
}

std::string resolve_data_path(const std::string& path) {
    if (path.empty() || std::filesystem::path(path).is_absolute()) return path;
    const char* base = std::getenv("BRSM_DATA_DIR");
    if (!base || !*base) return path;
    return (std::filesystem::path(base) / path).string();
}

ImagePool build_image_pool(const RunConfig& cfg, bool for_eval) {
    if (cfg.image_source == "mnist") {
        const std::filesystem::path dir(resolve_data_path(cfg.mnist_dir));
        const std::string images = for_eval ? "t10k-images-idx3-ubyte" : "train-images-idx3-ubyte";
        const std::string labels = for_eval ? "t10k-labels-idx1-ubyte" : "train-labels-idx1-ubyte";
        return ImagePool::from_mnist(read_idx_images_file((dir / images).string()),
                                     read_idx_labels_file((dir / labels).string()));
    }
    // One shared synthetic pool: prototypes must agree between training and
    // evaluation, so for_eval changes nothing here.
    Rng pool_rng(derive_seed(cfg.seed, kStreamPool));
    return ImagePool::synthetic(10, cfg.synthetic_variants, 784, cfg.synthetic_noise, pool_rng);
}

SsmnistHarness build_ssmnist_harness(const RunConfig& cfg) {
    GrammarSpec grammar = resolve_grammar(cfg.grammar);
    ImagePool pool = build_image_pool(cfg, false);
    std::optional<ImagePool> eval_pool;
    if (cfg.image_source == "mnist") eval_pool = build_image_pool(cfg, true);
    return SsmnistHarness(cfg, std::move(grammar), std::move(pool), std::move(eval_pool));
}

LmHarness build_lm_harness(const RunConfig& cfg) {
    require(!cfg.corpus_train.empty(), "train-lm: corpus_train is required");
    require(!cfg.corpus_test.empty(), "train-lm: corpus_test is required");
    const std::vector<std::string> train_tokens =
        tokenize(read_text_file(resolve_data_path(cfg.corpus_train)));
    Vocabulary vocab = Vocabulary::build(train_tokens);
    std::vector<int> train = token_stream(train_tokens, vocab);
    std::vector<int> valid = load_stream(cfg.corpus_valid, vocab);
    std::vector<int> test = load_stream(cfg.corpus_test, vocab);
    EmbeddingProvider embedding =
        cfg.embedding == "synthetic"
            ? EmbeddingProvider::synthetic(vocab.size())
            : EmbeddingProvider::from_table(
                  load_embedding_path(resolve_data_path(cfg.embedding_file)), vocab);
    return LmHarness(cfg, std::move(vocab), std::move(train), std::move(valid), std::move(test),
                     std::move(embedding));
}

int run_gen_grammar(const GenGrammarArgs& args, std::ostream& out) {
    GrammarSpec grammar;
    if (!args.builtin.empty()) {
        grammar = resolve_grammar("builtin:" + args.builtin);
    } else {
        Rng rng(args.seed);
        grammar = gen_grammar(args.subsequences, args.length, rng, args.distinct_prefix);
    }
    if (!args.out_path.empty())
        write_text_file(resolve_data_path(args.out_path), grammar.to_text());
    const double ceiling = ceiling_exact(grammar);
    out << "grammar: " << grammar.num_subsequences() << " sub-sequences of length "
        << grammar.length() << '\n';
    if (!args.out_path.empty()) out << "written to: " << args.out_path << '\n';
    out << "accuracy ceiling (exact): " << std::fixed << std::setprecision(4) << ceiling
        << std::defaultfloat << '\n';
    return 0;
}

int run_ceiling(const CeilingArgs& args, std::ostream& out) {
    const GrammarSpec grammar = resolve_grammar(args.grammar);
    const double exact = ceiling_exact(grammar);
    out << "accuracy ceiling (exact): " << std::fixed << std::setprecision(4) << exact
        << std::defaultfloat << '\n';
    if (args.montecarlo_steps > 0) {
        Rng rng(args.seed);
        const MonteCarloEstimate mc = ceiling_montecarlo(grammar, args.montecarlo_steps, rng);
        out << "monte carlo over " << mc.trials << " steps: " << std::fixed
            << std::setprecision(4) << mc.accuracy << " +/- " << std::setprecision(4)
            << mc.stderr_est << std::defaultfloat << '\n';
    }
    return 0;
}

TrainOutcome run_train_ssmnist(const RunConfig& cfg, std::ostream& out,
                               std::optional<double> stop_at, bool write_outputs) {
    cfg.validate();
    const std::string run_id = default_run_id("ssmnist", cfg);
    SsmnistHarness harness = build_ssmnist_harness(cfg);
    TrainOutcome outcome;
    outcome.grammar_ceiling = ceiling_exact(harness.grammar());
    out << "training ssmnist run '" << run_id << "' (" << cfg.steps
        << " steps, ceiling " << std::fixed << std::setprecision(4) << outcome.grammar_ceiling
        << std::defaultfloat << ")\n";
    if (write_outputs) {
        MetricWriter writer = make_writer(cfg, run_id);
        outcome.metrics_path = writer.path();
        outcome.summary = harness.train(&writer, stop_at);
        outcome.checkpoint_path = checkpoint_path_for(cfg, run_id);
        save_checkpoint(outcome.checkpoint_path, harness.snapshot());
    } else {
        outcome.summary = harness.train(nullptr, stop_at);
    }
    out << "final eval accuracy over last window: " << std::fixed << std::setprecision(4)
        << outcome.summary.final_eval << " (" << outcome.summary.final_eval /
                                                     outcome.grammar_ceiling
        << " of ceiling)" << std::defaultfloat << '\n';
    if (!outcome.metrics_path.empty()) out << "metrics: " << outcome.metrics_path << '\n';
    if (!outcome.checkpoint_path.empty()) out << "checkpoint: " << outcome.checkpoint_path << '\n';
    return outcome;
}

TrainOutcome run_train_lm(const RunConfig& cfg, std::ostream& out,
                          std::optional<double> stop_at, bool write_outputs) {
    cfg.validate();
    const std::string run_id = default_run_id("lm", cfg);
    LmHarness harness = build_lm_harness(cfg);
    TrainOutcome outcome;
    out << "training lm run '" << run_id << "' (" << cfg.steps << " steps, vocab "
        << harness.vocabulary().size() << ")\n";
    if (write_outputs) {
        MetricWriter writer = make_writer(cfg, run_id);
        outcome.metrics_path = writer.path();
        outcome.summary = harness.train(&writer, stop_at);
        outcome.checkpoint_path = checkpoint_path_for(cfg, run_id);
        save_checkpoint(outcome.checkpoint_path, harness.snapshot());
    } else {
        outcome.summary = harness.train(nullptr, stop_at);
    }
    const LmEval test_eval = harness.evaluate(harness.test_stream());
    outcome.test_ppl = test_eval.perplexity;
    outcome.unigram_ppl = harness.baseline_perplexity(harness.test_stream());
    out << "test perplexity: " << std::fixed << std::setprecision(3) << outcome.test_ppl
        << " (unigram baseline " << outcome.unigram_ppl << ")" << std::defaultfloat << '\n';
    if (!outcome.metrics_path.empty()) out << "metrics: " << outcome.metrics_path << '\n';
    if (!outcome.checkpoint_path.empty()) out << "checkpoint: " << outcome.checkpoint_path << '\n';
    return outcome;
}

EvalOutcome run_eval(const std::string& checkpoint_path,
                     const std::vector<std::pair<std::string, std::string>>& overrides,
                     std::ostream& out, bool write_outputs) {
    const CheckpointData data = load_checkpoint(resolve_data_path(checkpoint_path));
    RunConfig cfg = parse_config_text(data.config_text);
    for (const auto& [key, value] : overrides) apply_override(cfg, key, value);
    cfg.prob_forget = 0.0;  // evaluation never forgets
    cfg.validate();
    EvalOutcome outcome;
    outcome.task = data.task;
    const std::string run_id = default_run_id("eval", cfg) + "-eval";
    if (data.task == TaskKind::Ssmnist) {
        SsmnistHarness harness = build_ssmnist_harness(cfg);
        harness.restore(data);
        const SsmnistEval ev =
            harness.evaluate(derive_seed(cfg.seed, kStreamPool + 1), cfg.eval_steps);
        outcome.accuracy = ev.accuracy;
        outcome.entropy = ev.entropy;
        out << "eval accuracy: " << std::fixed << std::setprecision(4) << ev.accuracy
            << std::defaultfloat << " over " << ev.steps << " steps\n";
        if (write_outputs) {
            MetricWriter writer = make_writer(cfg, run_id);
            writer.emit(0, {{"eval_acc", ev.accuracy}, {"eval_entropy", ev.entropy}});
            outcome.metrics_path = writer.path();
        }
    } else {
        // The checkpoint carries its vocabulary and embedding; rebuild the
        // harness around them and the configured evaluation corpus.
        require(!cfg.corpus_test.empty(), "eval: corpus_test is required for lm checkpoints");
        Vocabulary vocab;
        for (const std::string& w : data.vocab_words) {
            vocab.index.emplace(w, static_cast<int>(vocab.words.size()));
            vocab.words.push_back(w);
        }
        auto unk = vocab.index.find("<unk>");
        vocab.unk_index = unk == vocab.index.end() ? -1 : unk->second;
        std::vector<int> test = load_stream(cfg.corpus_test, vocab);
        std::vector<int> train = load_stream(cfg.corpus_train, vocab);
        EmbeddingProvider embedding = EmbeddingProvider::from_vectors(data.embedding_vectors);
        LmHarness harness(cfg, std::move(vocab), std::move(train), {}, std::move(test),
                          std::move(embedding));
        harness.restore(data);
        const LmEval ev = harness.evaluate(harness.test_stream());
        outcome.perplexity = ev.perplexity;
        outcome.entropy = ev.entropy;
        out << "eval perplexity: " << std::fixed << std::setprecision(4) << ev.perplexity
            << std::defaultfloat << " over " << ev.tokens << " tokens\n";
        if (write_outputs) {
            MetricWriter writer = make_writer(cfg, run_id);
            writer.emit(0, {{"eval_ppl", ev.perplexity}, {"eval_entropy", ev.entropy}});
            outcome.metrics_path = writer.path();
        }
    }
    return outcome;
}

int run_gradcheck_command(std::uint64_t seed, const GradCheckOptions& opts, std::ostream& out) {
    const GradCheckReport report = run_gradcheck(seed, opts);
    out << report.to_string();
    out << (report.passed() ? "gradient check PASSED\n" : "gradient check FAILED\n");
    return report.passed() ? 0 : 1;
}

}  // namespace brsm
