#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "brsm/config.hpp"
#include "brsm/gradcheck.hpp"
#include "brsm/grammar.hpp"
#include "brsm/trainer.hpp"

namespace brsm {

// Command implementations behind the CLI; the acceptance suite calls these
// directly so both surfaces exercise identical code.

// "builtin:<name>" or a grammar file path.
GrammarSpec resolve_grammar(const std::string& spec);

// Honors BRSM_DATA_DIR for relative output/data locations.
std::string resolve_data_path(const std::string& path);

ImagePool build_image_pool(const RunConfig& cfg, bool for_eval);
SsmnistHarness build_ssmnist_harness(const RunConfig& cfg);
LmHarness build_lm_harness(const RunConfig& cfg);

struct GenGrammarArgs {
    int subsequences = 8;
    int length = 9;
    std::uint64_t seed = 1;
    bool distinct_prefix = false;
    std::string builtin;  // when set, write this fixture instead of sampling
    std::string out_path;
};

int run_gen_grammar(const GenGrammarArgs& args, std::ostream& out);

struct CeilingArgs {
    std::string grammar = "builtin:paper-8x9";
    long montecarlo_steps = 0;  // 0: exact only
    std::uint64_t seed = 1;
};

int run_ceiling(const CeilingArgs& args, std::ostream& out);

struct TrainOutcome {
    TrainSummary summary;
    std::string metrics_path;
    std::string checkpoint_path;
    double grammar_ceiling = 0.0;   // ssmnist only
    double unigram_ppl = 0.0;       // lm only
    double test_ppl = 0.0;          // lm only
};

TrainOutcome run_train_ssmnist(const RunConfig& cfg, std::ostream& out,
                               std::optional<double> stop_at = std::nullopt,
                               bool write_outputs = true);

TrainOutcome run_train_lm(const RunConfig& cfg, std::ostream& out,
                          std::optional<double> stop_at = std::nullopt,
                          bool write_outputs = true);

struct EvalOutcome {
    TaskKind task = TaskKind::Ssmnist;
    double accuracy = 0.0;    // ssmnist
    double perplexity = 0.0;  // lm
    double entropy = 0.0;
    std::string metrics_path;
};

EvalOutcome run_eval(const std::string& checkpoint_path,
                     const std::vector<std::pair<std::string, std::string>>& overrides,
                     std::ostream& out, bool write_outputs = true);

int run_gradcheck_command(std::uint64_t seed, const GradCheckOptions& opts, std::ostream& out);

}  // namespace brsm
