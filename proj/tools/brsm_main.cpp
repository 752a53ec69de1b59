#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "brsm/runner.hpp"

namespace {

struct ConfigArgs {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value
    std::optional<std::uint64_t> seed;
    std::optional<long> steps;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "config file (key = value sections)");
    cmd->add_option("--set", args.overrides, "override a config key, e.g. --set winners=24")
        ->type_name("KEY=VALUE");
    cmd->add_option("--seed", args.seed, "override the run seed");
    cmd->add_option("--steps", args.steps, "override the training step budget");
}

brsm::RunConfig build_config(const ConfigArgs& args) {
    brsm::RunConfig cfg;
    if (!args.config_path.empty())
        cfg = brsm::parse_config_file(brsm::resolve_data_path(args.config_path));
    for (const std::string& item : args.overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw brsm::ConfigError("--set expects KEY=VALUE, got '" + item + "'");
        brsm::apply_override(cfg, item.substr(0, eq), item.substr(eq + 1));
    }
    if (args.seed) cfg.seed = *args.seed;
    if (args.steps) cfg.steps = *args.steps;
    return cfg;
}

std::vector<std::pair<std::string, std::string>> split_overrides(
    const std::vector<std::string>& items) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const std::string& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw brsm::ConfigError("--set expects KEY=VALUE, got '" + item + "'");
        out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"boosted recurrent sparse memory: training and evaluation tools"};
    app.require_subcommand(1);

    // gen-grammar
    brsm::GenGrammarArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen-grammar", "sample a grammar and print its ceiling");
    gen->add_option("-m,--subsequences", gen_args.subsequences, "number of sub-sequences");
    gen->add_option("-n,--length", gen_args.length, "labels per sub-sequence");
    gen->add_option("--seed", gen_args.seed, "sampling seed");
    gen->add_flag("--distinct-prefix", gen_args.distinct_prefix,
                  "force pairwise distinct two-label prefixes");
    gen->add_option("--builtin", gen_args.builtin, "write a builtin fixture (paper-8x9)");
    gen->add_option("-o,--out", gen_args.out_path, "grammar file to write");

    // ceiling
    brsm::CeilingArgs ceil_args;
    CLI::App* ceil = app.add_subcommand("ceiling", "exact accuracy ceiling of a grammar");
    ceil->add_option("-g,--grammar", ceil_args.grammar, "grammar file or builtin:<name>");
    ceil->add_option("--montecarlo", ceil_args.montecarlo_steps,
                     "also run a Monte Carlo cross-check of this many steps");
    ceil->add_option("--seed", ceil_args.seed, "Monte Carlo seed");

    // train-ssmnist
    ConfigArgs ssmnist_args;
    CLI::App* train_ss =
        app.add_subcommand("train-ssmnist", "train on the grammar-driven image sequence task");
    add_config_options(train_ss, ssmnist_args);

    // train-lm
    ConfigArgs lm_args;
    CLI::App* train_lm = app.add_subcommand("train-lm", "train next-word prediction");
    add_config_options(train_lm, lm_args);

    // eval
    std::string eval_checkpoint;
    std::vector<std::string> eval_overrides;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint; no parameter updates");
    eval->add_option("checkpoint", eval_checkpoint, "checkpoint file")->required();
    eval->add_option("--set", eval_overrides, "override a config key for evaluation")
        ->type_name("KEY=VALUE");

    // gradcheck
    std::uint64_t grad_seed = 1;
    brsm::GradCheckOptions grad_opts;
    CLI::App* grad =
        app.add_subcommand("gradcheck", "finite-difference check of every analytic gradient");
    grad->add_option("--seed", grad_seed, "instance seed");
    grad->add_option("--instances", grad_opts.instances, "number of random micro instances");
    grad->add_option("--tolerance", grad_opts.tolerance, "max allowed relative error");
    grad->add_flag("--corrupt", grad_opts.corrupt,
                   "negative control: corrupt one gradient and expect failure")
        ->group("");  // hidden

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return brsm::run_gen_grammar(gen_args, std::cout);
        if (ceil->parsed()) return brsm::run_ceiling(ceil_args, std::cout);
        if (train_ss->parsed()) {
            brsm::run_train_ssmnist(build_config(ssmnist_args), std::cout);
            return 0;
        }
        if (train_lm->parsed()) {
            brsm::run_train_lm(build_config(lm_args), std::cout);
            return 0;
        }
        if (eval->parsed()) {
            brsm::run_eval(eval_checkpoint, split_overrides(eval_overrides), std::cout);
            return 0;
        }
        if (grad->parsed()) return brsm::run_gradcheck_command(grad_seed, grad_opts, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
