#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "srbm/evaluator.hpp"
#include "srbm/filters.hpp"
#include "srbm/mnist.hpp"
#include "srbm/oracle_check.hpp"
#include "srbm/train.hpp"

/*!
 * \file The experiment pipeline behind the command-line tool: data preparation,
 * training, evaluation, filter export and the oracle self-check.
 *
 * Every command is a function of (config, input files, seed); only wall-time
 * fields differ between re-runs.
 */

namespace srbm::experiment {

enum ExitCode : int { ok = 0, usage_error = 1, data_error = 2, numerical_error = 3 };

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class ModelKind { subspace, rbm };

inline const char* to_string(ModelKind k) { return k == ModelKind::rbm ? "rbm" : "subspace"; }

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "subspace") return ModelKind::subspace;
    if (s == "rbm") return ModelKind::rbm;
    throw UsageError("model kind must be rbm or subspace, got '" + s + "'");
}

struct ExperimentConfig {
    ModelKind kind = ModelKind::subspace;
    int M = 500;
    int K = 3;
    bool K_given = false;
    std::uint64_t seed = 0;
    mnist::SplitSpec split;
    TrainConfig train;
    double init_stddev = 0.01;
    std::string data_dir = "data/mnist";
    std::string out;
    std::vector<double> lambdas = default_lambda_grid();
    int max_gates = 0; ///< filter export limit, 0 = all

    /// Propagates the single experiment seed to the split and the training stream.
    void apply_seed(std::uint64_t s) {
        seed            = s;
        split.seed      = RngSeed{s};
        train.seed      = RngSeed{mix_seed(s ^ 0x7472616eULL)};
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline long long to_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) throw UsageError("config key '" + key + "': not an integer: '" + v + "'");
    return out;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    std::uint64_t out = 0;
    try {
        out = std::stoull(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty() || v[0] == '-') {
        throw UsageError("config key '" + key + "': not an unsigned integer: '" + v + "'");
    }
    return out;
}

inline double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) throw UsageError("config key '" + key + "': not a number: '" + v + "'");
    return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError("config key '" + key + "': not a boolean: '" + v + "'");
}

inline std::string format_lambdas(const std::vector<double>& l) {
    std::string s;
    for (std::size_t n = 0; n < l.size(); ++n) {
        if (n) s += ',';
        s += format_double(l[n]);
    }
    return s;
}

} // namespace detail

/// Applies one key = value setting. Unknown keys are usage errors.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "model_kind") c.kind = parse_model_kind(value);
    else if (key == "M") c.M = int(to_int(key, value));
    else if (key == "K") { c.K = int(to_int(key, value)); c.K_given = true; }
    else if (key == "seed") c.apply_seed(to_u64(key, value));
    else if (key == "split_seed") c.split.seed = RngSeed{to_u64(key, value)};
    else if (key == "train_seed") c.train.seed = RngSeed{to_u64(key, value)};
    else if (key == "per_digit") c.split.per_digit_train = int(to_int(key, value));
    else if (key == "validation_size") c.split.validation_size = int(to_int(key, value));
    else if (key == "test_size") c.split.test_size = int(to_int(key, value));
    else if (key == "data_dir") c.data_dir = value;
    else if (key == "out") c.out = value;
    else if (key == "learning_rate") c.train.learning_rate = to_double(key, value);
    else if (key == "minibatch_size") c.train.minibatch_size = int(to_int(key, value));
    else if (key == "cd_steps") c.train.cd_steps = int(to_int(key, value));
    else if (key == "lookahead") c.train.lookahead = int(to_int(key, value));
    else if (key == "max_epochs") c.train.max_epochs = int(to_int(key, value));
    else if (key == "sampled_statistics") c.train.sampled_statistics = to_bool(key, value);
    else if (key == "init_stddev") c.init_stddev = to_double(key, value);
    else if (key == "max_gates") c.max_gates = int(to_int(key, value));
    else if (key == "lambdas") {
        c.lambdas.clear();
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) c.lambdas.push_back(to_double(key, trim(item)));
        if (c.lambdas.empty()) throw UsageError("config key 'lambdas': empty list");
    } else {
        throw UsageError("unknown config key '" + key + "'");
    }
}

/// Line-oriented `key = value` text; '#' starts a comment.
inline void apply_config_text(ExperimentConfig& c, std::istream& in, const std::string& name = "<config>") {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(name + ":" + std::to_string(lineno) + ": expected key = value");
        }
        apply_setting(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
}

inline void apply_config_file(ExperimentConfig& c, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file " + path);
    apply_config_text(c, in, path);
}

/// The config as `key = value` lines, readable back by apply_config_text.
inline std::string echo_config(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "model_kind = " << to_string(c.kind) << '\n'
       << "M = " << c.M << '\n'
       << "K = " << c.K << '\n'
       << "seed = " << c.seed << '\n'
       << "split_seed = " << c.split.seed.value << '\n'
       << "train_seed = " << c.train.seed.value << '\n'
       << "per_digit = " << c.split.per_digit_train << '\n'
       << "validation_size = " << c.split.validation_size << '\n'
       << "test_size = " << c.split.test_size << '\n'
       << "data_dir = " << c.data_dir << '\n'
       << "learning_rate = " << format_double(c.train.learning_rate) << '\n'
       << "minibatch_size = " << c.train.minibatch_size << '\n'
       << "cd_steps = " << c.train.cd_steps << '\n'
       << "lookahead = " << c.train.lookahead << '\n'
       << "max_epochs = " << c.train.max_epochs << '\n'
       << "sampled_statistics = " << (c.train.sampled_statistics ? "true" : "false") << '\n'
       << "init_stddev = " << format_double(c.init_stddev) << '\n'
       << "lambdas = " << detail::format_lambdas(c.lambdas) << '\n';
    return os.str();
}

inline void validate(const ExperimentConfig& c) {
    if (c.M < 1) throw UsageError("M must be >= 1");
    if (c.kind == ModelKind::subspace && c.K < 1) throw UsageError("K must be >= 1");
    if (!(c.init_stddev >= 0.0)) throw UsageError("init_stddev must be >= 0");
    try {
        c.split.validate();
        c.train.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

// ---------------------------------------------------------------------------

using AnyModel = std::variant<ModelParams, RbmParams>;

/// Reads either model format, dispatching on the magic bytes.
inline AnyModel load_any_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open model file " + path);
    char magic[4] = {};
    in.read(magic, 4);
    in.seekg(0);
    try {
        if (std::string(magic, 4) == "RBM0") return read_rbm(in);
        return read_model(in);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

inline void save_any_model(const std::string& path, const AnyModel& m) {
    std::visit([&](const auto& p) {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, RbmParams>) save_rbm(path, p);
        else save_model(path, p);
    }, m);
}

inline AnyModel initial_model(const ExperimentConfig& c, Eigen::Index visible) {
    Rng rng(RngSeed{mix_seed(c.seed ^ 0x696e6974ULL)});
    if (c.kind == ModelKind::rbm) return RbmParams::random_init(visible, c.M, rng, c.init_stddev);
    return ModelParams::random_init(Shape{std::uint32_t(visible), std::uint32_t(c.M), std::uint32_t(c.K)}, rng,
                                    c.init_stddev);
}

inline std::string log_path(const std::string& model_path) { return model_path + ".log.csv"; }
inline std::string manifest_path(const std::string& model_path) { return model_path + ".manifest"; }

inline int cmd_prepare_data(const ExperimentConfig& c, std::ostream& os) {
    validate(c);
    const mnist::Corpus corpus = mnist::load_corpus(c.data_dir);
    const mnist::Splits s      = mnist::make_splits(corpus, c.split);
    os << "train " << s.train.size() << ", validation " << s.validation.size() << ", test " << s.test.size()
       << " (split seed " << c.split.seed.value << ")\n";
    std::array<int, 10> hist{};
    for (int y : s.train.labels) ++hist[std::size_t(y)];
    os << "train label histogram:";
    for (int h : hist) os << ' ' << h;
    os << '\n';
    if (!c.out.empty()) {
        std::ofstream out(c.out, std::ios::trunc);
        if (!out) throw FormatError("cannot open " + c.out + " for writing");
        out << "split,source_index,label\n";
        for (const mnist::Dataset* d : {&s.train, &s.validation, &s.test}) {
            for (std::size_t n = 0; n < d->sources.size(); ++n) {
                out << mnist::to_string(d->split) << ',' << d->sources[n] << ',' << d->labels[n] << '\n';
            }
        }
        os << "wrote " << c.out << '\n';
    }
    return ok;
}

inline int cmd_train(const ExperimentConfig& c, std::ostream& os, std::ostream& err) {
    validate(c);
    if (c.out.empty()) throw UsageError("train needs --out PATH for the model file");
    if (c.kind == ModelKind::rbm && c.K_given) {
        err << "warning: K is ignored for model kind rbm\n";
    }
    const auto start = std::chrono::steady_clock::now();
    const mnist::Corpus corpus = mnist::load_corpus(c.data_dir);
    const mnist::Splits s      = mnist::make_splits(corpus, c.split);

    std::ofstream log(log_path(c.out), std::ios::trunc);
    if (!log) throw FormatError("cannot open " + log_path(c.out) + " for writing");
    log << training_log_header() << '\n' << std::flush;

    AnyModel model = initial_model(c, s.train.images.cols());
    int best_epoch = 0;
    bool stopped_early = false;
    std::visit([&](const auto& p0) {
        using P = std::decay_t<decltype(p0)>;
        const EpochCallback<P> on_epoch = [&](const EpochRecord& r, const P&) {
            write_epoch_csv(log, r);
            log.flush();
            os << "epoch " << r.epoch << "  train " << format_double(r.train_recon) << "  valid "
               << format_double(r.valid_recon) << "  (" << format_double(r.seconds) << " s)\n";
        };
        TrainResult<P> result = train(s.train.images, s.validation.images, p0, c.train, on_epoch);
        best_epoch    = result.early_stop.best_epoch;
        stopped_early = result.stopped_early;
        model         = std::move(result.params);
    }, model);

    save_any_model(c.out, model);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream manifest(manifest_path(c.out), std::ios::trunc);
    manifest << echo_config(c) << "model_file = " << c.out << '\n'
             << "best_epoch = " << best_epoch << '\n'
             << "stopped_early = " << (stopped_early ? "true" : "false") << '\n'
             << "wall_time_seconds = " << format_double(seconds) << '\n';
    os << "wrote " << c.out << " (best epoch " << best_epoch << ")\n";
    return ok;
}

/// Metrics of one model on prepared splits: test reconstruction error, test classification
/// error of the lambda picked on validation, mean active gates on test.
inline MetricsReport evaluate(const AnyModel& model, const mnist::Splits& s, const ExperimentConfig& c,
                              const std::string& model_id) {
    MetricsReport r;
    r.model_id = model_id;
    r.split    = c.split;
    std::visit([&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, RbmParams>) {
            r.kind = "rbm";
            r.M    = int(p.M());
        } else {
            r.kind = "subspace";
            r.M    = int(p.shape.M());
            r.K    = int(p.shape.K());
        }
        r.recon_error = reconstruction_error(p, s.test.images);
        const Matrix train_f = gate_features(p, s.train.images);
        const Matrix valid_f = gate_features(p, s.validation.images);
        const Matrix test_f  = gate_features(p, s.test.images);
        const LambdaSelection sel = train_logreg(train_f, s.train.labels, valid_f, s.validation.labels, c.lambdas);
        r.classification_error = classification_error(sel.best, test_f, s.test.labels);
        r.selected_lambda      = sel.best.lambda;
        r.logreg_converged     = sel.best.converged;
        r.mean_active_units    = mean_active_units_from_features(test_f);
    }, model);
    return r;
}

inline int cmd_eval(const std::string& model_path, const ExperimentConfig& c, std::ostream& os) {
    validate(c);
    const AnyModel model = load_any_model(model_path);
    const mnist::Splits s = mnist::make_splits(mnist::load_corpus(c.data_dir), c.split);
    const MetricsReport r = evaluate(model, s, c, std::filesystem::path(model_path).filename().string());
    print_report(os, r);
    if (!c.out.empty()) {
        const bool fresh = !std::filesystem::exists(c.out) || std::filesystem::file_size(c.out) == 0;
        std::ofstream out(c.out, std::ios::app);
        if (!out) throw FormatError("cannot open " + c.out + " for writing");
        if (fresh) out << metrics_csv_header() << '\n';
        out << metrics_csv_line(r) << '\n';
    }
    return ok;
}

inline int cmd_export_filters(const std::string& model_path, const ExperimentConfig& c, std::ostream& os) {
    if (c.out.empty()) throw UsageError("export-filters needs --out PATH");
    const AnyModel model = load_any_model(model_path);
    const GrayImage img = std::visit([&](const auto& p) {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, RbmParams>) return rbm_filter_grid(p, c.max_gates);
        else return subspace_filter_grid(p, c.max_gates);
    }, model);
    write_pgm(c.out, img);
    os << "wrote " << c.out << " (" << img.width << " x " << img.height << ")\n";
    return ok;
}

inline int cmd_oracle_check(std::uint64_t seed, int trials, oracle::Mutation mutation, std::ostream& os) {
    if (trials < 0) throw UsageError("trials must be >= 0");
    const oracle::CheckReport r = oracle::run_oracle_check(seed, trials, {}, mutation);
    oracle::print_check_report(os, r);
    return r.passed() ? ok : numerical_error;
}

/// Runs a command body and maps exceptions onto exit codes.
template <typename Body>
int guarded(Body&& body, std::ostream& err) {
    try {
        return body();
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return usage_error;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return numerical_error;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << '\n';
        return data_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return data_error;
    }
}

} // namespace srbm::experiment
