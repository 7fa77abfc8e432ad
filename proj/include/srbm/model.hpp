#pragma once

#include <cstdint>
#include <fstream>
#include <numbers>
#include <string>

#include "srbm/binary_io.hpp"
#include "srbm/core.hpp"
#include "srbm/rng.hpp"

/*!
 * \file Subspace RBM: a third-order Boltzmann machine over visible units x,
 * gate units h and subspace units S, with energy
 *
 *   E(x, h, S) = -sum_ijk W_ijk x_i h_j s_jk - sum_i b_i x_i - sum_j c_j h_j - sum_jk h_j D_jk s_jk
 *
 * All closed-form conditionals and the free energy live here. Every function
 * is pure; parameters are read-only.
 */

namespace srbm {

inline constexpr double ln2 = std::numbers::ln2;

struct Shape {
    std::uint32_t visible  = 0; ///< number of visible units
    std::uint32_t gates    = 0; ///< number of gate units (M)
    std::uint32_t subspace = 0; ///< subspace units per gate (K)

    Eigen::Index D() const { return visible; }
    Eigen::Index M() const { return gates; }
    Eigen::Index K() const { return subspace; }
    Eigen::Index MK() const { return Eigen::Index(gates) * subspace; }

    void validate() const {
        if (visible == 0 || gates == 0 || subspace == 0) {
            throw DimensionError("shape dimensions must be strictly positive");
        }
    }

    friend bool operator==(const Shape&, const Shape&) = default;
};

/*!
 * \brief Parameters of a subspace RBM.
 *
 * The weight tensor W[i][j][k] is stored as a D x (M*K) row-major matrix with
 * column j*K + k, which is exactly the on-disk order (i outer, then j, then k).
 */
struct ModelParams {
    Shape shape;
    Matrix W;             ///< D x (M*K)
    Vector visible_bias;  ///< b, length D
    Vector gate_bias;     ///< c, length M
    Matrix subspace_bias; ///< D_jk, M x K

    static ModelParams zeros(Shape s) {
        s.validate();
        ModelParams p;
        p.shape         = s;
        p.W             = Matrix::Zero(s.D(), s.MK());
        p.visible_bias  = Vector::Zero(s.D());
        p.gate_bias     = Vector::Zero(s.M());
        p.subspace_bias = Matrix::Zero(s.M(), s.K());
        return p;
    }

    /// W and subspace biases i.i.d. normal(0, stddev^2); b and c zero.
    static ModelParams random_init(Shape s, Rng& rng, double stddev = 0.01) {
        ModelParams p = zeros(s);
        for (Eigen::Index i = 0; i < p.W.size(); ++i) {
            p.W.data()[i] = stddev * rng.normal();
        }
        for (Eigen::Index i = 0; i < p.subspace_bias.size(); ++i) {
            p.subspace_bias.data()[i] = stddev * rng.normal();
        }
        return p;
    }

    double& weight(Eigen::Index i, Eigen::Index j, Eigen::Index k) { return W(i, j * shape.K() + k); }
    double weight(Eigen::Index i, Eigen::Index j, Eigen::Index k) const { return W(i, j * shape.K() + k); }

    /// Subspace biases viewed as a length M*K vector (index j*K + k).
    Eigen::Map<const Vector> subspace_bias_flat() const { return {subspace_bias.data(), subspace_bias.size()}; }

    void check_dimensions() const {
        shape.validate();
        require_size(W.rows(), shape.D(), "W rows");
        require_size(W.cols(), shape.MK(), "W cols");
        require_size(visible_bias.size(), shape.D(), "visible bias");
        require_size(gate_bias.size(), shape.M(), "gate bias");
        require_size(subspace_bias.rows(), shape.M(), "subspace bias rows");
        require_size(subspace_bias.cols(), shape.K(), "subspace bias cols");
    }

    bool finite() const {
        return W.allFinite() && visible_bias.allFinite() && gate_bias.allFinite() && subspace_bias.allFinite();
    }

    std::size_t parameter_count() const {
        return std::size_t(W.size() + visible_bias.size() + gate_bias.size() + subspace_bias.size());
    }

    friend bool operator==(const ModelParams& a, const ModelParams& b) {
        return a.shape == b.shape && a.W == b.W && a.visible_bias == b.visible_bias && a.gate_bias == b.gate_bias &&
               a.subspace_bias == b.subspace_bias;
    }
};

namespace detail {

inline void check_visible(const ModelParams& p, const Vector& x) { require_size(x.size(), p.shape.D(), "visible vector"); }
inline void check_gates(const ModelParams& p, const Vector& h) { require_size(h.size(), p.shape.M(), "gate vector"); }
inline void check_subspace(const ModelParams& p, const Matrix& S) {
    require_size(S.rows(), p.shape.M(), "subspace matrix rows");
    require_size(S.cols(), p.shape.K(), "subspace matrix cols");
}

/// Flattened h_j * s_jk, index j*K + k.
inline Vector gated_subspace(const GateVector& h, const SubspaceMatrix& S) {
    Vector hs(S.size());
    const auto K = S.cols();
    for (Eigen::Index j = 0; j < S.rows(); ++j) {
        for (Eigen::Index k = 0; k < K; ++k) {
            hs[j * K + k] = h[j] * S(j, k);
        }
    }
    return hs;
}

/// Row-wise -K log 2 + c_j + sum_k softplus(a_jk) on an (N x M*K) activation block.
inline Matrix gate_logits(const Matrix& acts, const ModelParams& p) {
    const auto M = p.shape.M();
    const auto K = p.shape.K();
    Matrix out(acts.rows(), M);
    for (Eigen::Index n = 0; n < acts.rows(); ++n) {
        for (Eigen::Index j = 0; j < M; ++j) {
            double s = p.gate_bias[j];
            for (Eigen::Index k = 0; k < K; ++k) {
                s += softplus(acts(n, j * K + k)) - ln2;
            }
            out(n, j) = s;
        }
    }
    return out;
}

} // namespace detail

/// a[j][k] = sum_i W[i][j][k] x[i] + D[j][k], returned as an M x K matrix.
inline Matrix activations(const VisibleVector& x, const ModelParams& p) {
    detail::check_visible(p, x);
    Vector flat = p.W.transpose() * x + p.subspace_bias_flat();
    return Eigen::Map<const Matrix>(flat.data(), p.shape.M(), p.shape.K());
}

/// Activations for a batch of visible rows (N x D), returned flattened as N x (M*K).
inline Matrix batch_activations(const Matrix& X, const ModelParams& p) {
    require_size(X.cols(), p.shape.D(), "visible batch columns");
    Matrix A = X * p.W;
    A.rowwise() += p.subspace_bias_flat().transpose();
    return A;
}

inline double energy(const VisibleVector& x, const GateVector& h, const SubspaceMatrix& S, const ModelParams& p) {
    detail::check_visible(p, x);
    detail::check_gates(p, h);
    detail::check_subspace(p, S);
    const Vector hs = detail::gated_subspace(h, S);
    const double interaction = x.dot(p.W * hs);
    return -interaction - p.visible_bias.dot(x) - p.gate_bias.dot(h) - p.subspace_bias_flat().dot(hs);
}

/// p(x_i = 1 | h, S) = sigm(sum_jk W_ijk h_j s_jk + b_i)
inline Vector prob_x_given_hS(const GateVector& h, const SubspaceMatrix& S, const ModelParams& p) {
    detail::check_gates(p, h);
    detail::check_subspace(p, S);
    return sigmoid(p.W * detail::gated_subspace(h, S) + p.visible_bias);
}

/// p(s_jk = 1 | x, h_j) = sigm(h_j a_jk); rows with a closed gate are exactly 0.5.
inline Matrix prob_S_given_xh(const VisibleVector& x, const GateVector& h, const ModelParams& p) {
    detail::check_gates(p, h);
    const Matrix a = activations(x, p);
    Matrix out(a.rows(), a.cols());
    for (Eigen::Index j = 0; j < a.rows(); ++j) {
        for (Eigen::Index k = 0; k < a.cols(); ++k) {
            out(j, k) = sigmoid(h[j] * a(j, k));
        }
    }
    return out;
}

/*!
 * \brief p(h_j = 1 | x) with S marginalized out.
 *
 * sigm(-K log 2 + c_j + sum_k softplus(a_jk)). The -K log 2 term keeps a gate
 * closed unless its subspace evidence beats the group-size penalty.
 */
inline Vector prob_h_given_x(const VisibleVector& x, const ModelParams& p) {
    detail::check_visible(p, x);
    Matrix acts = (p.W.transpose() * x + p.subspace_bias_flat()).transpose();
    return sigmoid(detail::gate_logits(acts, p).row(0).transpose());
}

/// Gate probabilities for a batch of visible rows (N x D) -> N x M.
inline Matrix batch_prob_h_given_x(const Matrix& X, const ModelParams& p) {
    return sigmoid(detail::gate_logits(batch_activations(X, p), p));
}

/// log of exp(b.x + c.h) * prod_jk (1 + exp(h_j a_jk)), the unnormalized p(x | h) with S summed out.
inline double log_unnorm_p_x_given_h(const VisibleVector& x, const GateVector& h, const ModelParams& p) {
    detail::check_gates(p, h);
    const Matrix a = activations(x, p);
    double s = p.visible_bias.dot(x) + p.gate_bias.dot(h);
    for (Eigen::Index j = 0; j < a.rows(); ++j) {
        for (Eigen::Index k = 0; k < a.cols(); ++k) {
            s += softplus(h[j] * a(j, k));
        }
    }
    return s;
}

/// F(x) = -b.x - sum_j log(2^K + exp(c_j + sum_k softplus(a_jk))), so p(x) is proportional to exp(-F(x)).
inline double free_energy(const VisibleVector& x, const ModelParams& p) {
    const Matrix a = activations(x, p);
    const double closed = double(p.shape.K()) * ln2;
    double f = -p.visible_bias.dot(x);
    for (Eigen::Index j = 0; j < a.rows(); ++j) {
        double open = p.gate_bias[j];
        for (Eigen::Index k = 0; k < a.cols(); ++k) {
            open += softplus(a(j, k));
        }
        f -= log_add_exp(closed, open);
    }
    return f;
}

// Model file: "SRBM" 0x01, D M K as u32 LE, then W (i, j, k order), b, c, D (row-major), all f64 LE.

inline constexpr char model_magic[] = "SRBM";
inline constexpr std::uint8_t model_version = 1;

inline void write_model(std::ostream& out, const ModelParams& p) {
    p.check_dimensions();
    out.write(model_magic, 4);
    out.put(static_cast<char>(model_version));
    io::write_u32_le(out, p.shape.visible);
    io::write_u32_le(out, p.shape.gates);
    io::write_u32_le(out, p.shape.subspace);
    io::write_f64_block(out, p.W);
    io::write_f64_block(out, p.visible_bias);
    io::write_f64_block(out, p.gate_bias);
    io::write_f64_block(out, p.subspace_bias);
}

inline ModelParams read_model(std::istream& in) {
    io::Reader r(in);
    r.expect_magic(model_magic, model_version);
    Shape s;
    s.visible  = r.u32_le("D_vis");
    s.gates    = r.u32_le("M");
    s.subspace = r.u32_le("K");
    try {
        s.validate();
    } catch (const DimensionError& e) {
        throw FormatError(std::string("invalid header: ") + e.what());
    }
    ModelParams p = ModelParams::zeros(s);
    r.f64_block(p.W, "W");
    r.f64_block(p.visible_bias, "b");
    r.f64_block(p.gate_bias, "c");
    r.f64_block(p.subspace_bias, "D");
    r.expect_end();
    return p;
}

inline void save_model(const std::string& path, const ModelParams& p) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    write_model(out, p);
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

inline ModelParams load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open model file " + path);
    }
    return read_model(in);
}

} // namespace srbm
