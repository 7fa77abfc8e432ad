#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "srbm/binary_io.hpp"
#include "srbm/cd.hpp"
#include "srbm/core.hpp"
#include "srbm/rng.hpp"

/*!
 * \file Binary-binary RBM baseline, E(x, h) = -x^T W h - b^T x - c^T h.
 *
 * Kept separate from the subspace model: a subspace model with K = 1 still
 * carries the -log 2 gate penalty and the s variables, so it is not an RBM.
 */

namespace srbm {

struct RbmParams {
    Matrix W; ///< D x M
    Vector visible_bias;
    Vector hidden_bias;

    Eigen::Index D() const { return W.rows(); }
    Eigen::Index M() const { return W.cols(); }

    static RbmParams zeros(Eigen::Index visible, Eigen::Index hidden) {
        if (visible <= 0 || hidden <= 0) {
            throw DimensionError("RBM dimensions must be strictly positive");
        }
        return {Matrix::Zero(visible, hidden), Vector::Zero(visible), Vector::Zero(hidden)};
    }

    static RbmParams random_init(Eigen::Index visible, Eigen::Index hidden, Rng& rng, double stddev = 0.01) {
        RbmParams p = zeros(visible, hidden);
        for (Eigen::Index i = 0; i < p.W.size(); ++i) {
            p.W.data()[i] = stddev * rng.normal();
        }
        return p;
    }

    void check_dimensions() const {
        require_size(visible_bias.size(), D(), "RBM visible bias");
        require_size(hidden_bias.size(), M(), "RBM hidden bias");
    }

    bool finite() const { return W.allFinite() && visible_bias.allFinite() && hidden_bias.allFinite(); }

    friend bool operator==(const RbmParams& a, const RbmParams& b) {
        return a.W == b.W && a.visible_bias == b.visible_bias && a.hidden_bias == b.hidden_bias;
    }
};

struct RbmGradient {
    Matrix W;
    Vector b;
    Vector c;

    Vector flatten() const {
        Vector v(W.size() + b.size() + c.size());
        v << Eigen::Map<const Vector>(W.data(), W.size()), b, c;
        return v;
    }
};

inline double rbm_energy(const Vector& x, const Vector& h, const RbmParams& p) {
    return -x.dot(p.W * h) - p.visible_bias.dot(x) - p.hidden_bias.dot(h);
}

inline Vector rbm_prob_h_given_x(const Vector& x, const RbmParams& p) {
    require_size(x.size(), p.D(), "visible vector");
    return sigmoid(p.W.transpose() * x + p.hidden_bias);
}

inline Vector rbm_prob_x_given_h(const Vector& h, const RbmParams& p) {
    require_size(h.size(), p.M(), "hidden vector");
    return sigmoid(p.W * h + p.visible_bias);
}

inline Matrix rbm_batch_prob_h_given_x(const Matrix& X, const RbmParams& p) {
    require_size(X.cols(), p.D(), "visible batch columns");
    Matrix A = X * p.W;
    A.rowwise() += p.hidden_bias.transpose();
    return sigmoid(A);
}

/// -F(x) = b.x + sum_j softplus(c_j + (W^T x)_j)
inline double rbm_free_energy(const Vector& x, const RbmParams& p) {
    const Vector a = p.W.transpose() * x + p.hidden_bias;
    double f = -p.visible_bias.dot(x);
    for (Eigen::Index j = 0; j < a.size(); ++j) {
        f -= softplus(a[j]);
    }
    return f;
}

namespace detail {

inline RbmGradient rbm_batch_stats(const Matrix& X, const RbmParams& p) {
    const Matrix H    = rbm_batch_prob_h_given_x(X, p);
    const double inv = 1.0 / double(X.rows());
    return {X.transpose() * H * inv, X.colwise().sum().transpose() * inv, H.colwise().sum().transpose() * inv};
}

} // namespace detail

/// Mean CD-k direction x p(h|x)^T - x~ p(h|x~)^T, each chain on its own stream split off rng.
inline RbmGradient rbm_cd_direction(const Matrix& batch, const RbmParams& p, const TrainConfig& cfg, Rng& rng) {
    if (batch.rows() == 0) {
        throw std::invalid_argument("rbm_cd_update: empty batch");
    }
    require_size(batch.cols(), p.D(), "batch columns");
    Matrix chain_ends(batch.rows(), p.D());
    for (Eigen::Index n = 0; n < batch.rows(); ++n) {
        Rng chain_rng = rng.split();
        Vector x = batch.row(n).transpose();
        for (int t = 0; t < cfg.cd_steps; ++t) {
            const Vector h = sample_bernoulli(rbm_prob_h_given_x(x, p), chain_rng);
            x              = sample_bernoulli(rbm_prob_x_given_h(h, p), chain_rng);
        }
        chain_ends.row(n) = x.transpose();
    }
    RbmGradient g         = detail::rbm_batch_stats(batch, p);
    const RbmGradient neg = detail::rbm_batch_stats(chain_ends, p);
    g.W -= neg.W;
    g.b -= neg.b;
    g.c -= neg.c;
    return g;
}

inline RbmParams cd_update(const Matrix& batch, const RbmParams& p, const TrainConfig& cfg, Rng& rng) {
    const RbmGradient g = rbm_cd_direction(batch, p, cfg, rng);
    RbmParams next      = p;
    if (cfg.learning_rate == 0.0) {
        return next;
    }
    next.W.noalias() += cfg.learning_rate * g.W;
    next.visible_bias += cfg.learning_rate * g.b;
    next.hidden_bias += cfg.learning_rate * g.c;
    if (!next.finite()) {
        throw NumericalError("rbm_cd_update produced non-finite parameters");
    }
    return next;
}

inline RbmParams rbm_cd_update(const Matrix& batch, const RbmParams& p, const TrainConfig& cfg, Rng& rng) {
    return cd_update(batch, p, cfg, rng);
}

// Model file: "RBM0" 0x01, D M as u32 LE, then W (row-major), b, c as f64 LE.

inline constexpr char rbm_magic[]        = "RBM0";
inline constexpr std::uint8_t rbm_version = 1;

inline void write_rbm(std::ostream& out, const RbmParams& p) {
    p.check_dimensions();
    out.write(rbm_magic, 4);
    out.put(static_cast<char>(rbm_version));
    io::write_u32_le(out, static_cast<std::uint32_t>(p.D()));
    io::write_u32_le(out, static_cast<std::uint32_t>(p.M()));
    io::write_f64_block(out, p.W);
    io::write_f64_block(out, p.visible_bias);
    io::write_f64_block(out, p.hidden_bias);
}

inline RbmParams read_rbm(std::istream& in) {
    io::Reader r(in);
    r.expect_magic(rbm_magic, rbm_version);
    const auto D = r.u32_le("D_vis");
    const auto M = r.u32_le("M");
    if (D == 0 || M == 0) {
        throw FormatError("invalid header: RBM dimensions must be strictly positive");
    }
    RbmParams p = RbmParams::zeros(D, M);
    r.f64_block(p.W, "W");
    r.f64_block(p.visible_bias, "b");
    r.f64_block(p.hidden_bias, "c");
    r.expect_end();
    return p;
}

inline void save_rbm(const std::string& path, const RbmParams& p) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    write_rbm(out, p);
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

inline RbmParams load_rbm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open model file " + path);
    }
    return read_rbm(in);
}

} // namespace srbm
