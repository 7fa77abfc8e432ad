#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "srbm/model.hpp"
#include "srbm/sampler.hpp"

namespace srbm {

struct TrainConfig {
    double learning_rate = 0.01;
    int minibatch_size   = 10;
    int cd_steps         = 1;
    int lookahead        = 10;
    int max_epochs       = 100;
    RngSeed seed{};
    /// Use sampled (h, S) in both phases instead of their conditional expectations.
    bool sampled_statistics = false;

    void validate() const {
        if (!(learning_rate >= 0.0) || minibatch_size < 1 || cd_steps < 1 || lookahead < 1 || max_epochs < 0) {
            throw std::invalid_argument("TrainConfig: learning_rate >= 0, minibatch_size, cd_steps, lookahead >= 1 "
                                        "and max_epochs >= 0 required");
        }
    }
};

/// Expectations of -dE/dtheta, laid out like ModelParams.
struct GradientStats {
    Matrix W;
    Vector b;
    Vector c;
    Matrix D;

    static GradientStats zeros(const Shape& s) {
        return {Matrix::Zero(s.D(), s.MK()), Vector::Zero(s.D()), Vector::Zero(s.M()), Matrix::Zero(s.M(), s.K())};
    }

    GradientStats& operator+=(const GradientStats& o) {
        W += o.W;
        b += o.b;
        c += o.c;
        D += o.D;
        return *this;
    }

    GradientStats& operator-=(const GradientStats& o) {
        W -= o.W;
        b -= o.b;
        c -= o.c;
        D -= o.D;
        return *this;
    }

    GradientStats& operator*=(double s) {
        W *= s;
        b *= s;
        c *= s;
        D *= s;
        return *this;
    }

    bool finite() const { return W.allFinite() && b.allFinite() && c.allFinite() && D.allFinite(); }

    /// W, b, c, D concatenated in storage order.
    Vector flatten() const {
        Vector v(W.size() + b.size() + c.size() + D.size());
        Eigen::Index o = 0;
        v.segment(o, W.size()) = Eigen::Map<const Vector>(W.data(), W.size());
        o += W.size();
        v.segment(o, b.size()) = b;
        o += b.size();
        v.segment(o, c.size()) = c;
        o += c.size();
        v.segment(o, D.size()) = Eigen::Map<const Vector>(D.data(), D.size());
        return v;
    }
};

/// Flatten parameters in the same order as GradientStats::flatten.
inline Vector flatten(const ModelParams& p) {
    GradientStats g{p.W, p.visible_bias, p.gate_bias, p.subspace_bias};
    return g.flatten();
}

inline ModelParams unflatten(const Vector& v, const Shape& s) {
    ModelParams p = ModelParams::zeros(s);
    require_size(v.size(), Eigen::Index(p.parameter_count()), "flat parameter vector");
    Eigen::Index o = 0;
    Eigen::Map<Vector>(p.W.data(), p.W.size()) = v.segment(o, p.W.size());
    o += p.W.size();
    p.visible_bias = v.segment(o, s.D());
    o += s.D();
    p.gate_bias = v.segment(o, s.M());
    o += s.M();
    Eigen::Map<Vector>(p.subspace_bias.data(), p.subspace_bias.size()) = v.segment(o, s.MK());
    return p;
}

/*!
 * \brief Clamped statistics E[x_i h_j s_jk], E[x_i], E[h_j], E[h_j s_jk] under p(h, S | x).
 *
 * With q_j = p(h_j = 1 | x) and r_jk = sigm(a_jk), E[h_j s_jk | x] = q_j r_jk.
 */
inline GradientStats positive_stats(const VisibleVector& x, const ModelParams& p) {
    const Vector q = prob_h_given_x(x, p);
    const Matrix r = sigmoid(activations(x, p));
    Matrix hs = r.array().colwise() * q.array();
    const Eigen::Map<const Vector> hs_flat(hs.data(), hs.size());
    return {x * hs_flat.transpose(), x, q, hs};
}

/// Model-side statistics at the end of a chain: the clamped expectations evaluated at the chain's x.
inline GradientStats negative_stats(const GibbsState& state, const ModelParams& p) {
    return positive_stats(state.x, p);
}

/// Statistics from one joint sample (x, h, S) rather than expectations.
inline GradientStats sampled_stats(const VisibleVector& x, const GateVector& h, const SubspaceMatrix& S) {
    const Vector hs = detail::gated_subspace(h, S);
    Matrix hs_mat = Eigen::Map<const Matrix>(hs.data(), S.rows(), S.cols());
    return {x * hs.transpose(), x, h, hs_mat};
}

namespace detail {

/// Mean clamped statistics over the rows of X via one GEMM.
inline GradientStats batch_positive_stats(const Matrix& X, const ModelParams& p) {
    const auto M = p.shape.M();
    const auto K = p.shape.K();
    const Matrix A = batch_activations(X, p);
    const Matrix Q = sigmoid(gate_logits(A, p));
    Matrix HS = sigmoid(A);
    for (Eigen::Index n = 0; n < HS.rows(); ++n) {
        for (Eigen::Index j = 0; j < M; ++j) {
            HS.row(n).segment(j * K, K) *= Q(n, j);
        }
    }
    const double inv = 1.0 / double(X.rows());
    GradientStats g;
    g.W = X.transpose() * HS * inv;
    g.b = X.colwise().sum().transpose() * inv;
    g.c = Q.colwise().sum().transpose() * inv;
    Vector d = HS.colwise().sum().transpose() * inv;
    g.D = Eigen::Map<const Matrix>(d.data(), M, K);
    return g;
}

inline GradientStats batch_sampled_stats(const Matrix& X, const Matrix& H, const Matrix& HS) {
    const double inv = 1.0 / double(X.rows());
    GradientStats g;
    g.W = X.transpose() * HS * inv;
    g.b = X.colwise().sum().transpose() * inv;
    g.c = H.colwise().sum().transpose() * inv;
    Vector d = HS.colwise().sum().transpose() * inv;
    g.D = Eigen::Map<const Matrix>(d.data(), H.cols(), HS.cols() / H.cols());
    return g;
}

inline void apply_update(ModelParams& p, const GradientStats& g, double lr) {
    p.W.noalias() += lr * g.W;
    p.visible_bias += lr * g.b;
    p.gate_bias += lr * g.c;
    p.subspace_bias += lr * g.D;
}

} // namespace detail

/*!
 * \brief Mean CD-k direction (positive minus negative statistics) over a batch (rows of X).
 *
 * Each example's negative chain is a cd_steps-long gibbs_chain started at the
 * example, driven by its own stream split off `rng` in row order.
 */
inline GradientStats cd_direction(const Matrix& batch, const ModelParams& p, const TrainConfig& cfg, Rng& rng) {
    if (batch.rows() == 0) {
        throw std::invalid_argument("cd_update: empty batch");
    }
    require_size(batch.cols(), p.shape.D(), "batch columns");
    const auto B = batch.rows();
    Matrix chain_ends(B, p.shape.D());
    Matrix pos_h, pos_hs, neg_h, neg_hs;
    if (cfg.sampled_statistics) {
        pos_h.resize(B, p.shape.M());
        pos_hs.resize(B, p.shape.MK());
        neg_h.resize(B, p.shape.M());
        neg_hs.resize(B, p.shape.MK());
    }
    for (Eigen::Index n = 0; n < B; ++n) {
        Rng chain_rng = rng.split();
        const VisibleVector x = batch.row(n).transpose();
        if (cfg.sampled_statistics) {
            const GateVector h     = sample_h_given_x(x, p, chain_rng);
            const SubspaceMatrix S = sample_S_given_xh(x, h, p, chain_rng);
            pos_h.row(n)  = h.transpose();
            pos_hs.row(n) = detail::gated_subspace(h, S).transpose();
        }
        GibbsState end = gibbs_chain(x, p, cfg.cd_steps, chain_rng);
        chain_ends.row(n) = end.x.transpose();
        if (cfg.sampled_statistics) {
            const GateVector h     = sample_h_given_x(end.x, p, chain_rng);
            const SubspaceMatrix S = sample_S_given_xh(end.x, h, p, chain_rng);
            neg_h.row(n)  = h.transpose();
            neg_hs.row(n) = detail::gated_subspace(h, S).transpose();
        }
    }
    GradientStats g = cfg.sampled_statistics ? detail::batch_sampled_stats(batch, pos_h, pos_hs)
                                             : detail::batch_positive_stats(batch, p);
    g -= cfg.sampled_statistics ? detail::batch_sampled_stats(chain_ends, neg_h, neg_hs)
                                : detail::batch_positive_stats(chain_ends, p);
    return g;
}

/// theta <- theta + learning_rate * mean(positive - negative). Throws NumericalError on a non-finite result.
inline ModelParams cd_update(const Matrix& batch, const ModelParams& p, const TrainConfig& cfg, Rng& rng) {
    const GradientStats g = cd_direction(batch, p, cfg, rng);
    ModelParams next = p;
    if (cfg.learning_rate == 0.0) {
        return next;
    }
    detail::apply_update(next, g, cfg.learning_rate);
    if (!g.finite() || !next.finite()) {
        throw NumericalError("cd_update produced non-finite parameters (learning_rate=" +
                             std::to_string(cfg.learning_rate) + ")");
    }
    return next;
}

inline ModelParams cd_update(const std::vector<VisibleVector>& batch, const ModelParams& p, const TrainConfig& cfg,
                             Rng& rng) {
    if (batch.empty()) {
        throw std::invalid_argument("cd_update: empty batch");
    }
    Matrix X(Eigen::Index(batch.size()), p.shape.D());
    for (std::size_t n = 0; n < batch.size(); ++n) {
        detail::check_visible(p, batch[n]);
        X.row(Eigen::Index(n)) = batch[n].transpose();
    }
    return cd_update(X, p, cfg, rng);
}

} // namespace srbm
