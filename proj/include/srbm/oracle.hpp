#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "srbm/cd.hpp"
#include "srbm/core.hpp"
#include "srbm/model.hpp"
#include "srbm/rbm.hpp"

/*!
 * \file Brute-force ground truth for tiny models.
 *
 * Every quantity here is obtained by summing exp(-E) over all joint
 * configurations, with E evaluated by a plain triple loop. Nothing in this
 * file calls the closed-form conditionals of model.hpp, so the two can be
 * compared against each other.
 */

namespace srbm::oracle {

struct EnumBudget {
    int max_total_bits = 20;
};

using Code = std::uint64_t;

/// Entry i of the result is bit i of code.
inline Vector decode(Code code, Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = double((code >> i) & 1u);
    }
    return v;
}

inline Code encode(const Vector& v) {
    Code code = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] != 0.0) {
            code |= Code(1) << i;
        }
    }
    return code;
}

/// Subspace matrix from M*K bits; bit j*K + k is s_jk.
inline Matrix decode_subspace(Code code, Eigen::Index M, Eigen::Index K) {
    Matrix S(M, K);
    for (Eigen::Index j = 0; j < M; ++j) {
        for (Eigen::Index k = 0; k < K; ++k) {
            S(j, k) = double((code >> (j * K + k)) & 1u);
        }
    }
    return S;
}

inline Code encode_subspace(const Matrix& S) {
    Code code = 0;
    for (Eigen::Index j = 0; j < S.rows(); ++j) {
        for (Eigen::Index k = 0; k < S.cols(); ++k) {
            if (S(j, k) != 0.0) {
                code |= Code(1) << (j * S.cols() + k);
            }
        }
    }
    return code;
}

/// The energy written out term by term.
inline double reference_energy(const Vector& x, const Vector& h, const Matrix& S, const ModelParams& p) {
    const auto D = p.shape.D();
    const auto M = p.shape.M();
    const auto K = p.shape.K();
    double e = 0.0;
    for (Eigen::Index i = 0; i < D; ++i) {
        for (Eigen::Index j = 0; j < M; ++j) {
            for (Eigen::Index k = 0; k < K; ++k) {
                e -= p.weight(i, j, k) * x[i] * h[j] * S(j, k);
            }
        }
    }
    for (Eigen::Index i = 0; i < D; ++i) {
        e -= p.visible_bias[i] * x[i];
    }
    for (Eigen::Index j = 0; j < M; ++j) {
        e -= p.gate_bias[j] * h[j];
    }
    for (Eigen::Index j = 0; j < M; ++j) {
        for (Eigen::Index k = 0; k < K; ++k) {
            e -= h[j] * p.subspace_bias(j, k) * S(j, k);
        }
    }
    return e;
}

/*!
 * \brief log exp(-E) for every joint configuration of a subspace model.
 *
 * Configuration index = x_code | h_code << D | s_code << (D + M).
 */
class JointTable {
public:
    JointTable(const ModelParams& p, EnumBudget budget = {}) : shape_(p.shape) {
        p.check_dimensions();
        const auto bits = shape_.D() + shape_.M() + shape_.MK();
        if (bits > budget.max_total_bits) {
            throw BudgetError("enumeration needs " + std::to_string(bits) + " bits, budget is " +
                              std::to_string(budget.max_total_bits));
        }
        log_weight_.resize(std::size_t(1) << bits);
        std::vector<Vector> xs(num_x()), hs(num_h());
        std::vector<Matrix> ss(num_s());
        for (Code c = 0; c < num_x(); ++c) xs[c] = decode(c, shape_.D());
        for (Code c = 0; c < num_h(); ++c) hs[c] = decode(c, shape_.M());
        for (Code c = 0; c < num_s(); ++c) ss[c] = decode_subspace(c, shape_.M(), shape_.K());
        for (Code s = 0; s < num_s(); ++s) {
            for (Code h = 0; h < num_h(); ++h) {
                for (Code x = 0; x < num_x(); ++x) {
                    log_weight_[index(x, h, s)] = -reference_energy(xs[x], hs[h], ss[s], p);
                }
            }
        }
        log_z_ = log_sum_exp(log_weight_);
    }

    const Shape& shape() const { return shape_; }
    Code num_x() const { return Code(1) << shape_.D(); }
    Code num_h() const { return Code(1) << shape_.M(); }
    Code num_s() const { return Code(1) << shape_.MK(); }

    std::size_t index(Code x, Code h, Code s) const {
        return std::size_t(x | (h << shape_.D()) | (s << (shape_.D() + shape_.M())));
    }

    double log_weight(Code x, Code h, Code s) const { return log_weight_[index(x, h, s)]; }
    double log_partition() const { return log_z_; }

private:
    Shape shape_;
    std::vector<double> log_weight_;
    double log_z_ = 0.0;
};

inline double log_partition_function(const ModelParams& p, EnumBudget budget = {}) {
    return JointTable(p, budget).log_partition();
}

inline double partition_function(const ModelParams& p, EnumBudget budget = {}) {
    return std::exp(log_partition_function(p, budget));
}

/// log p(x) for every x code.
inline std::vector<double> log_marginal_x(const JointTable& t) {
    std::vector<double> out(t.num_x(), -INFINITY);
    for (Code x = 0; x < t.num_x(); ++x) {
        double acc = -INFINITY;
        for (Code s = 0; s < t.num_s(); ++s) {
            for (Code h = 0; h < t.num_h(); ++h) {
                acc = log_add_exp(acc, t.log_weight(x, h, s));
            }
        }
        out[x] = acc - t.log_partition();
    }
    return out;
}

inline std::vector<double> marginal_x(const JointTable& t) {
    std::vector<double> out = log_marginal_x(t);
    for (double& v : out) v = std::exp(v);
    return out;
}

/// p(h_j = 1 | x), S summed out.
inline Vector h_given_x(const JointTable& t, Code x) {
    const auto M = t.shape().M();
    double total = -INFINITY;
    std::vector<double> on(std::size_t(M), -INFINITY);
    for (Code s = 0; s < t.num_s(); ++s) {
        for (Code h = 0; h < t.num_h(); ++h) {
            const double lw = t.log_weight(x, h, s);
            total = log_add_exp(total, lw);
            for (Eigen::Index j = 0; j < M; ++j) {
                if ((h >> j) & 1u) on[std::size_t(j)] = log_add_exp(on[std::size_t(j)], lw);
            }
        }
    }
    Vector out(M);
    for (Eigen::Index j = 0; j < M; ++j) out[j] = std::exp(on[std::size_t(j)] - total);
    return out;
}

/// p(s_jk = 1 | x, h).
inline Matrix S_given_xh(const JointTable& t, Code x, Code h) {
    const auto M = t.shape().M();
    const auto K = t.shape().K();
    double total = -INFINITY;
    std::vector<double> on(std::size_t(M * K), -INFINITY);
    for (Code s = 0; s < t.num_s(); ++s) {
        const double lw = t.log_weight(x, h, s);
        total = log_add_exp(total, lw);
        for (Eigen::Index b = 0; b < M * K; ++b) {
            if ((s >> b) & 1u) on[std::size_t(b)] = log_add_exp(on[std::size_t(b)], lw);
        }
    }
    Matrix out(M, K);
    for (Eigen::Index j = 0; j < M; ++j)
        for (Eigen::Index k = 0; k < K; ++k) out(j, k) = std::exp(on[std::size_t(j * K + k)] - total);
    return out;
}

/// p(x_i = 1 | h, S).
inline Vector x_given_hS(const JointTable& t, Code h, Code s) {
    const auto D = t.shape().D();
    double total = -INFINITY;
    std::vector<double> on(std::size_t(D), -INFINITY);
    for (Code x = 0; x < t.num_x(); ++x) {
        const double lw = t.log_weight(x, h, s);
        total = log_add_exp(total, lw);
        for (Eigen::Index i = 0; i < D; ++i) {
            if ((x >> i) & 1u) on[std::size_t(i)] = log_add_exp(on[std::size_t(i)], lw);
        }
    }
    Vector out(D);
    for (Eigen::Index i = 0; i < D; ++i) out[i] = std::exp(on[std::size_t(i)] - total);
    return out;
}

/// Full distribution p(x | h) over x codes, S summed out.
inline std::vector<double> x_given_h(const JointTable& t, Code h) {
    std::vector<double> logp(t.num_x(), -INFINITY);
    for (Code x = 0; x < t.num_x(); ++x) {
        for (Code s = 0; s < t.num_s(); ++s) {
            logp[x] = log_add_exp(logp[x], t.log_weight(x, h, s));
        }
    }
    const double norm = log_sum_exp(logp);
    for (double& v : logp) v = std::exp(v - norm);
    return logp;
}

struct Conditionals {
    std::vector<Vector> h_given_x;               ///< [x]
    std::vector<std::vector<Matrix>> S_given_xh; ///< [x][h]
    std::vector<std::vector<Vector>> x_given_hS; ///< [h][s]
};

inline Conditionals exact_conditionals(const ModelParams& p, EnumBudget budget = {}) {
    const JointTable t(p, budget);
    Conditionals c;
    for (Code x = 0; x < t.num_x(); ++x) {
        c.h_given_x.push_back(h_given_x(t, x));
        c.S_given_xh.emplace_back();
        for (Code h = 0; h < t.num_h(); ++h) c.S_given_xh.back().push_back(S_given_xh(t, x, h));
    }
    for (Code h = 0; h < t.num_h(); ++h) {
        c.x_given_hS.emplace_back();
        for (Code s = 0; s < t.num_s(); ++s) c.x_given_hS.back().push_back(x_given_hS(t, h, s));
    }
    return c;
}

namespace detail {

/// Adds weight * (x_i h_j s_jk, x_i, h_j, h_j s_jk) of one configuration to g.
inline void accumulate_sufficient_stats(GradientStats& g, Code x, Code h, Code s, const Shape& shape, double w) {
    const auto D = shape.D();
    const auto M = shape.M();
    const auto K = shape.K();
    for (Eigen::Index i = 0; i < D; ++i) {
        if (!((x >> i) & 1u)) continue;
        g.b[i] += w;
        for (Eigen::Index j = 0; j < M; ++j) {
            if (!((h >> j) & 1u)) continue;
            for (Eigen::Index k = 0; k < K; ++k) {
                if ((s >> (j * K + k)) & 1u) g.W(i, j * K + k) += w;
            }
        }
    }
    for (Eigen::Index j = 0; j < M; ++j) {
        if (!((h >> j) & 1u)) continue;
        g.c[j] += w;
        for (Eigen::Index k = 0; k < K; ++k) {
            if ((s >> (j * K + k)) & 1u) g.D(j, k) += w;
        }
    }
}

} // namespace detail

/// E[-dE/dtheta | x] under p(h, S | x).
inline GradientStats clamped_expectations(const JointTable& t, Code x) {
    double log_px = -INFINITY;
    for (Code s = 0; s < t.num_s(); ++s)
        for (Code h = 0; h < t.num_h(); ++h) log_px = log_add_exp(log_px, t.log_weight(x, h, s));
    GradientStats g = GradientStats::zeros(t.shape());
    for (Code s = 0; s < t.num_s(); ++s)
        for (Code h = 0; h < t.num_h(); ++h)
            detail::accumulate_sufficient_stats(g, x, h, s, t.shape(), std::exp(t.log_weight(x, h, s) - log_px));
    return g;
}

/// E[-dE/dtheta] under the joint model distribution.
inline GradientStats model_expectations(const JointTable& t) {
    GradientStats g = GradientStats::zeros(t.shape());
    for (Code s = 0; s < t.num_s(); ++s)
        for (Code h = 0; h < t.num_h(); ++h)
            for (Code x = 0; x < t.num_x(); ++x)
                detail::accumulate_sufficient_stats(g, x, h, s, t.shape(),
                                                    std::exp(t.log_weight(x, h, s) - t.log_partition()));
    return g;
}

struct LogLikGrad {
    double log_likelihood = 0.0;
    GradientStats gradient;
};

/// sum_n log p(x_n) and its gradient, data expectations minus N times model expectations.
inline LogLikGrad exact_loglik_and_grad(const std::vector<Vector>& data, const ModelParams& p,
                                        EnumBudget budget = {}) {
    const JointTable t(p, budget);
    const std::vector<double> logp = log_marginal_x(t);
    LogLikGrad out{0.0, GradientStats::zeros(p.shape)};
    for (const Vector& x : data) {
        require_size(x.size(), p.shape.D(), "data vector");
        const Code code = encode(x);
        out.log_likelihood += logp[code];
        out.gradient += clamped_expectations(t, code);
    }
    GradientStats model = model_expectations(t);
    model *= double(data.size());
    out.gradient -= model;
    return out;
}

inline double exact_log_likelihood(const std::vector<Vector>& data, const ModelParams& p, EnumBudget budget = {}) {
    const JointTable t(p, budget);
    const std::vector<double> logp = log_marginal_x(t);
    double ll = 0.0;
    for (const Vector& x : data) ll += logp[encode(x)];
    return ll;
}

/// Central differences (f(p + eps e_i) - f(p - eps e_i)) / (2 eps) over every parameter coordinate.
inline GradientStats finite_diff_grad(const std::function<double(const ModelParams&)>& f, const ModelParams& p,
                                      double epsilon) {
    const Vector base = flatten(p);
    Vector grad(base.size());
    Vector probe = base;
    for (Eigen::Index i = 0; i < base.size(); ++i) {
        probe[i] = base[i] + epsilon;
        const double up = f(unflatten(probe, p.shape));
        probe[i] = base[i] - epsilon;
        const double down = f(unflatten(probe, p.shape));
        probe[i] = base[i];
        grad[i] = (up - down) / (2.0 * epsilon);
    }
    const ModelParams g = unflatten(grad, p.shape);
    return {g.W, g.visible_bias, g.gate_bias, g.subspace_bias};
}

// ---------------------------------------------------------------------------
// Second-order RBM

inline double rbm_reference_energy(const Vector& x, const Vector& h, const RbmParams& p) {
    double e = 0.0;
    for (Eigen::Index i = 0; i < p.D(); ++i)
        for (Eigen::Index j = 0; j < p.M(); ++j) e -= p.W(i, j) * x[i] * h[j];
    for (Eigen::Index i = 0; i < p.D(); ++i) e -= p.visible_bias[i] * x[i];
    for (Eigen::Index j = 0; j < p.M(); ++j) e -= p.hidden_bias[j] * h[j];
    return e;
}

/// log exp(-E) over (x, h), index x | h << D.
class RbmJointTable {
public:
    RbmJointTable(const RbmParams& p, EnumBudget budget = {}) : D_(p.D()), M_(p.M()) {
        p.check_dimensions();
        if (D_ + M_ > budget.max_total_bits) {
            throw BudgetError("RBM enumeration needs " + std::to_string(D_ + M_) + " bits, budget is " +
                              std::to_string(budget.max_total_bits));
        }
        log_weight_.resize(std::size_t(1) << (D_ + M_));
        for (Code h = 0; h < num_h(); ++h) {
            const Vector hv = decode(h, M_);
            for (Code x = 0; x < num_x(); ++x) log_weight_[x | (h << D_)] = -rbm_reference_energy(decode(x, D_), hv, p);
        }
        log_z_ = log_sum_exp(log_weight_);
    }

    Eigen::Index D() const { return D_; }
    Eigen::Index M() const { return M_; }
    Code num_x() const { return Code(1) << D_; }
    Code num_h() const { return Code(1) << M_; }
    double log_weight(Code x, Code h) const { return log_weight_[x | (h << D_)]; }
    double log_partition() const { return log_z_; }

private:
    Eigen::Index D_, M_;
    std::vector<double> log_weight_;
    double log_z_ = 0.0;
};

inline Vector rbm_h_given_x(const RbmJointTable& t, Code x) {
    double total = -INFINITY;
    std::vector<double> on(std::size_t(t.M()), -INFINITY);
    for (Code h = 0; h < t.num_h(); ++h) {
        const double lw = t.log_weight(x, h);
        total = log_add_exp(total, lw);
        for (Eigen::Index j = 0; j < t.M(); ++j)
            if ((h >> j) & 1u) on[std::size_t(j)] = log_add_exp(on[std::size_t(j)], lw);
    }
    Vector out(t.M());
    for (Eigen::Index j = 0; j < t.M(); ++j) out[j] = std::exp(on[std::size_t(j)] - total);
    return out;
}

inline Vector rbm_x_given_h(const RbmJointTable& t, Code h) {
    double total = -INFINITY;
    std::vector<double> on(std::size_t(t.D()), -INFINITY);
    for (Code x = 0; x < t.num_x(); ++x) {
        const double lw = t.log_weight(x, h);
        total = log_add_exp(total, lw);
        for (Eigen::Index i = 0; i < t.D(); ++i)
            if ((x >> i) & 1u) on[std::size_t(i)] = log_add_exp(on[std::size_t(i)], lw);
    }
    Vector out(t.D());
    for (Eigen::Index i = 0; i < t.D(); ++i) out[i] = std::exp(on[std::size_t(i)] - total);
    return out;
}

struct RbmLogLikGrad {
    double log_likelihood = 0.0;
    RbmGradient gradient;
};

inline RbmLogLikGrad rbm_exact_loglik_and_grad(const std::vector<Vector>& data, const RbmParams& p,
                                               EnumBudget budget = {}) {
    const RbmJointTable t(p, budget);
    const auto D = t.D();
    const auto M = t.M();
    auto accumulate = [&](RbmGradient& g, Code x, Code h, double w) {
        for (Eigen::Index i = 0; i < D; ++i) {
            if (!((x >> i) & 1u)) continue;
            g.b[i] += w;
            for (Eigen::Index j = 0; j < M; ++j)
                if ((h >> j) & 1u) g.W(i, j) += w;
        }
        for (Eigen::Index j = 0; j < M; ++j)
            if ((h >> j) & 1u) g.c[j] += w;
    };
    RbmLogLikGrad out{0.0, {Matrix::Zero(D, M), Vector::Zero(D), Vector::Zero(M)}};
    for (const Vector& xv : data) {
        const Code x = encode(xv);
        double log_px = -INFINITY;
        for (Code h = 0; h < t.num_h(); ++h) log_px = log_add_exp(log_px, t.log_weight(x, h));
        out.log_likelihood += log_px - t.log_partition();
        for (Code h = 0; h < t.num_h(); ++h) accumulate(out.gradient, x, h, std::exp(t.log_weight(x, h) - log_px));
    }
    const double n = double(data.size());
    for (Code h = 0; h < t.num_h(); ++h)
        for (Code x = 0; x < t.num_x(); ++x)
            accumulate(out.gradient, x, h, -n * std::exp(t.log_weight(x, h) - t.log_partition()));
    return out;
}

} // namespace srbm::oracle
