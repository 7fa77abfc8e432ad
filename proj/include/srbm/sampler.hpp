#pragma once

#include "srbm/model.hpp"
#include "srbm/rng.hpp"

namespace srbm {

struct GibbsState {
    VisibleVector x;
    GateVector h;
    SubspaceMatrix S;
};

/// One uniform draw per entry, visited in storage (row-major) order.
template <typename Derived>
typename Derived::PlainObject sample_bernoulli(const Eigen::MatrixBase<Derived>& probs, Rng& rng) {
    typename Derived::PlainObject out(probs.rows(), probs.cols());
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        for (Eigen::Index c = 0; c < probs.cols(); ++c) {
            out(r, c) = rng.bernoulli(probs(r, c)) ? 1.0 : 0.0;
        }
    }
    return out;
}

inline GateVector sample_h_given_x(const VisibleVector& x, const ModelParams& p, Rng& rng) {
    return sample_bernoulli(prob_h_given_x(x, p), rng);
}

inline SubspaceMatrix sample_S_given_xh(const VisibleVector& x, const GateVector& h, const ModelParams& p, Rng& rng) {
    return sample_bernoulli(prob_S_given_xh(x, h, p), rng);
}

inline VisibleVector sample_x_given_hS(const GateVector& h, const SubspaceMatrix& S, const ModelParams& p, Rng& rng) {
    return sample_bernoulli(prob_x_given_hS(h, S, p), rng);
}

/// One sweep h ~ p(h|x), S ~ p(S|x,h), x ~ p(x|h,S), in that order.
inline void gibbs_step(GibbsState& state, const ModelParams& p, Rng& rng) {
    state.h = sample_h_given_x(state.x, p, rng);
    state.S = sample_S_given_xh(state.x, state.h, p, rng);
    state.x = sample_x_given_hS(state.h, state.S, p, rng);
}

inline GibbsState gibbs_chain(const VisibleVector& x0, const ModelParams& p, int steps, Rng& rng) {
    if (steps < 1) {
        throw std::invalid_argument("gibbs_chain: steps must be >= 1");
    }
    detail::check_visible(p, x0);
    GibbsState state{x0, GateVector::Zero(p.shape.M()), SubspaceMatrix::Zero(p.shape.M(), p.shape.K())};
    for (int t = 0; t < steps; ++t) {
        gibbs_step(state, p, rng);
    }
    return state;
}

} // namespace srbm
