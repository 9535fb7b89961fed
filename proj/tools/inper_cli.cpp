#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "inper/enin.hpp"
#include "inper/errors.hpp"
#include "inper/experiment.hpp"
#include "inper/hoper.hpp"

namespace ex = inper::experiment;

namespace {

// Flag values land here first; only flags the user actually passed are copied
// onto the config, so the file keeps authority over everything untouched.
struct Overrides {
    std::string config_path, dataset, out, model, method, patch_ratio, cp_lambda;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> seeds;
    std::size_t target_domain = 0, bank_capacity = 0, classes = 0, per_domain = 0;
    std::uint64_t data_seed = 0;
    double enin_prob = 0.0, beta_alpha = 0.0, homeo_threshold = 0.0, entropy_threshold = 0.0;
};

void attach_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_path, "JSON config file; flags override it");
    cmd->add_option("--dataset", o.dataset, "dataset directory");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--model", o.model, "model checkpoint path");
    cmd->add_option("--seed", o.seed, "single run seed");
    cmd->add_option("--seeds", o.seeds, "run seeds")->delimiter(',');
    cmd->add_option("--target-domain", o.target_domain, "held-out domain id");
    cmd->add_option("--method", o.method,
                    "baseline | enin | inper | inper-no-homeoscore");
    cmd->add_option("--enin-prob", o.enin_prob, "EnIn apply probability");
    cmd->add_option("--beta-alpha", o.beta_alpha, "Beta(a,a) mixing parameter");
    cmd->add_option("--patch-ratio", o.patch_ratio, "1/4 or 1/8");
    cmd->add_option("--homeo-threshold", o.homeo_threshold, "HomeoScore admission cut");
    cmd->add_option("--entropy-threshold", o.entropy_threshold, "bank entropy cut");
    cmd->add_option("--bank-capacity", o.bank_capacity, "per-class bank capacity");
    cmd->add_option("--cp-lambda", o.cp_lambda, "fixed:X or beta");
    cmd->add_option("--classes", o.classes, "gen-data: number of classes");
    cmd->add_option("--per-domain", o.per_domain, "gen-data: samples per domain");
    cmd->add_option("--data-seed", o.data_seed, "gen-data: generation seed");
}

ex::ExperimentConfig build_config(const CLI::App* cmd, const Overrides& o) {
    ex::ExperimentConfig cfg;
    if (!o.config_path.empty()) cfg = ex::config_from_file(o.config_path);
    const auto given = [cmd](const std::string& name) { return cmd->count(name) > 0; };
    if (given("--dataset")) cfg.dataset_dir = o.dataset;
    if (given("--out")) cfg.out_dir = o.out;
    if (given("--model")) cfg.model_path = o.model;
    if (given("--seed")) cfg.seeds = {o.seed};
    if (given("--seeds")) cfg.seeds = o.seeds;
    if (given("--target-domain")) cfg.target_domain = o.target_domain;
    if (given("--method")) cfg.method = ex::parse_method(o.method);
    if (given("--enin-prob")) cfg.train.enin.apply_probability = o.enin_prob;
    if (given("--beta-alpha")) cfg.train.enin.beta_alpha = o.beta_alpha;
    if (given("--patch-ratio")) {
        const auto r = inper::enin::parse_patch_ratio(o.patch_ratio);
        cfg.train.enin.patch_ratio = r;
        cfg.hoper.patch_ratio = r;
    }
    if (given("--homeo-threshold")) cfg.hoper.homeo_threshold = o.homeo_threshold;
    if (given("--entropy-threshold")) cfg.hoper.entropy_threshold = o.entropy_threshold;
    if (given("--bank-capacity")) cfg.hoper.capacity = o.bank_capacity;
    if (given("--cp-lambda")) inper::hoper::set_cp_lambda(cfg.hoper, o.cp_lambda);
    if (given("--classes")) cfg.classes = o.classes;
    if (given("--per-domain")) cfg.per_domain = o.per_domain;
    if (given("--data-seed")) cfg.data_seed = o.data_seed;
    if (cfg.seeds.empty()) throw inper::ConfigError("at least one seed is required");
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"InPer experiments: EnIn training and HoPer test-time adaptation"};
    app.require_subcommand(1);

    Overrides o;
    CLI::App* gen = app.add_subcommand("gen-data", "synthesize a multi-domain dataset");
    CLI::App* train = app.add_subcommand("train", "train leave-one-out models");
    CLI::App* adapt = app.add_subcommand("adapt", "run HoPer on the target stream");
    CLI::App* eval = app.add_subcommand("eval", "score a method on the target domain");
    CLI::App* dump = app.add_subcommand("dump-embeddings", "write final features as TDF");
    for (CLI::App* cmd : {gen, train, adapt, eval, dump}) attach_common(cmd, o);

    CLI11_PARSE(app, argc, argv);

    const CLI::App* cmd = app.get_subcommands().front();
    try {
        const ex::ExperimentConfig cfg = build_config(cmd, o);
        const std::string& name = cmd->get_name();
        if (name == "gen-data") ex::cmd_gen_data(cfg);
        else if (name == "train") ex::cmd_train(cfg);
        else if (name == "adapt") ex::cmd_adapt(cfg);
        else if (name == "eval") ex::cmd_eval(cfg);
        else ex::cmd_dump_embeddings(cfg);
    } catch (const inper::Error& e) {
        std::cerr << argv[0] << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << argv[0] << ": " << e.what() << "\n";
        return 2;
    }
    return 0;
}
