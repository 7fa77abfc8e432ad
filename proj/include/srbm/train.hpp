#pragma once

#include <chrono>
#include <functional>
#include <numeric>
#include <ostream>
#include <vector>

#include "srbm/cd.hpp"
#include "srbm/evaluator.hpp"
#include "srbm/rbm.hpp"

namespace srbm {

struct EpochRecord {
    int epoch = 0;
    double train_recon = 0.0;
    double valid_recon = 0.0;
    double seconds = 0.0;
};

inline const char* training_log_header() { return "epoch,train_recon,valid_recon,epoch_seconds"; }

inline void write_epoch_csv(std::ostream& os, const EpochRecord& r) {
    os << r.epoch << ',' << format_double(r.train_recon) << ',' << format_double(r.valid_recon) << ','
       << format_double(r.seconds) << '\n';
}

struct EarlyStopState {
    double best_validation_error = INFINITY;
    int best_epoch = 0;
    int epochs_since_best = 0;
};

template <typename Params>
struct TrainResult {
    Params params;
    std::vector<EpochRecord> log;
    EarlyStopState early_stop;
    bool stopped_early = false;
};

template <typename Params>
using EpochCallback = std::function<void(const EpochRecord&, const Params&)>;

/*!
 * \brief Minibatch CD training with early stopping on validation reconstruction error.
 *
 * Each epoch visits the training rows in a seed-determined shuffled order.
 * The snapshot with the lowest validation error is returned; training stops
 * after `lookahead` epochs without improvement or at max_epochs. Works for any
 * parameter type with cd_update and reconstruction_error overloads.
 */
template <typename Params>
TrainResult<Params> train(const Matrix& train_data, const Matrix& valid_data, const Params& p0,
                          const TrainConfig& cfg, const EpochCallback<Params>& on_epoch = {}) {
    cfg.validate();
    TrainResult<Params> result{p0, {}, {}, false};
    if (cfg.max_epochs == 0) {
        return result;
    }
    if (train_data.rows() == 0 || valid_data.rows() == 0) {
        throw std::invalid_argument("train: empty training or validation split");
    }
    if (cfg.minibatch_size > train_data.rows()) {
        throw std::invalid_argument("train: minibatch_size exceeds training-set size");
    }

    Rng rng(cfg.seed);
    Params current = p0;
    std::vector<Eigen::Index> order(std::size_t(train_data.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index(0));
    Matrix batch;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        shuffle(order, rng);
        for (std::size_t first = 0; first < order.size(); first += std::size_t(cfg.minibatch_size)) {
            const std::size_t last = std::min(order.size(), first + std::size_t(cfg.minibatch_size));
            batch.resize(Eigen::Index(last - first), train_data.cols());
            for (std::size_t n = first; n < last; ++n) {
                batch.row(Eigen::Index(n - first)) = train_data.row(order[n]);
            }
            current = cd_update(batch, current, cfg, rng);
        }
        EpochRecord rec;
        rec.epoch       = epoch;
        rec.train_recon = reconstruction_error(current, train_data);
        rec.valid_recon = reconstruction_error(current, valid_data);
        rec.seconds     = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.log.push_back(rec);
        if (on_epoch) {
            on_epoch(rec, current);
        }

        auto& es = result.early_stop;
        if (rec.valid_recon < es.best_validation_error) {
            es.best_validation_error = rec.valid_recon;
            es.best_epoch            = epoch;
            es.epochs_since_best     = 0;
            result.params            = current;
        } else if (++es.epochs_since_best >= cfg.lookahead) {
            result.stopped_early = true;
            break;
        }
    }
    return result;
}

} // namespace srbm
