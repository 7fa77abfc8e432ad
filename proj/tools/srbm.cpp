// Command-line front end: prepare-data, train, eval, export-filters, oracle-check.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "srbm/experiment.hpp"

namespace {

using namespace srbm::experiment;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> model_kind;
    std::optional<int> M;
    std::optional<int> K;
    std::optional<int> per_digit;
    std::optional<std::string> data_dir;
    std::optional<std::string> out;
    std::vector<std::string> settings;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key = value config file (flags override it)");
        cmd->add_option("--seed", seed, "experiment seed");
        cmd->add_option("--model-kind", model_kind, "rbm or subspace")->check(CLI::IsMember({"rbm", "subspace"}));
        cmd->add_option("--M", M, "number of gate (hidden) units");
        cmd->add_option("--K", K, "subspace units per gate");
        cmd->add_option("--per-digit", per_digit, "training examples per digit")
            ->check(CLI::IsMember({10, 100, 1000}));
        cmd->add_option("--data-dir", data_dir, "directory with the MNIST IDX files (raw or .gz)");
        cmd->add_option("--out", out, "output path");
        cmd->add_option("--set", settings, "extra KEY=VALUE config settings, e.g. --set max_epochs=50");
    }

    /// Config file first, then --set, then the dedicated flags.
    ExperimentConfig resolve() const {
        ExperimentConfig c;
        if (!config_path.empty()) apply_config_file(c, config_path);
        for (const auto& kv : settings) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw UsageError("--set expects KEY=VALUE, got '" + kv + "'");
            apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (seed) c.apply_seed(*seed);
        if (model_kind) c.kind = parse_model_kind(*model_kind);
        if (M) c.M = *M;
        if (K) {
            c.K       = *K;
            c.K_given = true;
        }
        if (per_digit) c.split.per_digit_train = *per_digit;
        if (data_dir) c.data_dir = *data_dir;
        if (out) c.out = *out;
        return c;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subspace RBM and RBM training / evaluation on binarized MNIST"};
    app.require_subcommand(1);

    CommonFlags prepare_flags, train_flags, eval_flags, export_flags;

    auto* prepare = app.add_subcommand("prepare-data", "load MNIST, build the splits, optionally write split indices");
    prepare_flags.attach(prepare);

    auto* train = app.add_subcommand("train", "train a model and write it with its CSV log and manifest");
    train_flags.attach(train);

    std::string model_path;
    auto* eval = app.add_subcommand("eval", "reconstruction, classification and active-unit metrics");
    eval->add_option("model", model_path, "model file")->required();
    eval_flags.attach(eval);

    std::string filter_model;
    auto* export_filters = app.add_subcommand("export-filters", "write the weight filters as a PGM tile grid");
    export_filters->add_option("model", filter_model, "model file")->required();
    export_flags.attach(export_filters);

    std::uint64_t check_seed = 0;
    int trials = 100;
    std::string mutation = "none";
    auto* check = app.add_subcommand("oracle-check", "compare closed forms against brute-force enumeration");
    check->add_option("--seed", check_seed, "sweep seed");
    check->add_option("--trials", trials, "number of random tiny models");
    check->add_option("--mutate", mutation, "inject a known fault (drop-gate-penalty) to test the check itself")
        ->check(CLI::IsMember({"none", "drop-gate-penalty"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage_error;
    }

    auto& out = std::cout;
    auto& err = std::cerr;
    if (*prepare) {
        return guarded([&] { return cmd_prepare_data(prepare_flags.resolve(), out); }, err);
    }
    if (*train) {
        return guarded([&] { return cmd_train(train_flags.resolve(), out, err); }, err);
    }
    if (*eval) {
        return guarded([&] { return cmd_eval(model_path, eval_flags.resolve(), out); }, err);
    }
    if (*export_filters) {
        return guarded([&] { return cmd_export_filters(filter_model, export_flags.resolve(), out); }, err);
    }
    if (*check) {
        const auto m = mutation == "drop-gate-penalty" ? srbm::oracle::Mutation::drop_gate_penalty
                                                       : srbm::oracle::Mutation::none;
        return guarded([&] { return cmd_oracle_check(check_seed, trials, m, out); }, err);
    }
    return usage_error;
}
