#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "srbm/cd.hpp"
#include "srbm/model.hpp"
#include "srbm/oracle.hpp"

namespace srbm::oracle {

struct Tolerances {
    double conditional   = 1e-10;
    double marginal      = 1e-10;
    double normalization = 1e-12;
    double gradient_rel  = 1e-6;
    double fd_epsilon    = 1e-5;
};

/// Deliberate faults used to show that the sweep notices a broken formula.
enum class Mutation { none, drop_gate_penalty };

struct CheckFinding {
    std::string check;
    int trial = 0;
    std::uint64_t model_seed = 0;
    double error = 0.0;
    std::string where;
};

struct CheckReport {
    int trials = 0;
    std::vector<CheckFinding> worst;    ///< largest error per check over all trials
    std::vector<CheckFinding> failures; ///< every breach
    bool passed() const { return failures.empty(); }
};

/// Random model with D_vis <= 5, M <= 2, K <= 3 and N(0, 1) parameters, fully determined by seed.
inline ModelParams random_tiny_model(std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    Shape s;
    s.visible  = std::uint32_t(1 + rng.below(5));
    s.gates    = std::uint32_t(1 + rng.below(2));
    s.subspace = std::uint32_t(1 + rng.below(3));
    ModelParams p = ModelParams::zeros(s);
    for (Eigen::Index i = 0; i < p.W.size(); ++i) p.W.data()[i] = scale * rng.normal();
    for (Eigen::Index i = 0; i < p.visible_bias.size(); ++i) p.visible_bias[i] = scale * rng.normal();
    for (Eigen::Index i = 0; i < p.gate_bias.size(); ++i) p.gate_bias[i] = scale * rng.normal();
    for (Eigen::Index i = 0; i < p.subspace_bias.size(); ++i) p.subspace_bias.data()[i] = scale * rng.normal();
    return p;
}

namespace detail {

inline Vector gate_probability(const Vector& x, const ModelParams& p, Mutation m) {
    if (m != Mutation::drop_gate_penalty) {
        return prob_h_given_x(x, p);
    }
    const Matrix a = activations(x, p);
    Vector out(p.shape.M());
    for (Eigen::Index j = 0; j < out.size(); ++j) {
        double s = p.gate_bias[j];
        for (Eigen::Index k = 0; k < a.cols(); ++k) s += softplus(a(j, k));
        out[j] = sigmoid(s);
    }
    return out;
}

class Tracker {
public:
    Tracker(CheckReport& report, int trial, std::uint64_t seed) : report_(report), trial_(trial), seed_(seed) {}

    void record(const std::string& check, double error, double tolerance, const std::string& where) {
        CheckFinding f{check, trial_, seed_, error, where};
        auto it = std::find_if(report_.worst.begin(), report_.worst.end(),
                               [&](const CheckFinding& w) { return w.check == check; });
        if (it == report_.worst.end()) {
            report_.worst.push_back(f);
        } else if (!(error <= it->error)) {
            *it = f;
        }
        if (!(error <= tolerance)) {
            report_.failures.push_back(f);
        }
    }

private:
    CheckReport& report_;
    int trial_;
    std::uint64_t seed_;
};

template <typename A, typename B>
std::pair<double, Eigen::Index> max_abs_diff(const A& a, const B& b) {
    Eigen::Index at = 0;
    const double err = (a - b).cwiseAbs().maxCoeff(&at);
    return {err, at};
}

} // namespace detail

/*!
 * \brief Compares every closed form of the model against enumeration on
 * `trials` random tiny models, seeds derived from `seed`.
 *
 * Checks: p(x|h,S), p(S|x,h), p(h|x), normalized p(x|h) with S summed out,
 * exp(-F(x))/Z, sum_x p(x) = 1, clamped statistics, and the exact
 * log-likelihood gradient against central differences.
 */
inline CheckReport run_oracle_check(std::uint64_t seed, int trials, const Tolerances& tol = {},
                                    Mutation mutation = Mutation::none) {
    CheckReport report;
    report.trials = trials;
    for (int trial = 0; trial < trials; ++trial) {
        const std::uint64_t model_seed = mix_seed(seed ^ (0x5851f42d4c957f2dULL * std::uint64_t(trial + 1)));
        const ModelParams p = random_tiny_model(model_seed);
        detail::Tracker track(report, trial, model_seed);
        const JointTable t(p);
        const auto D = p.shape.D();
        const auto M = p.shape.M();
        const auto K = p.shape.K();

        for (Code h = 0; h < t.num_h(); ++h) {
            for (Code s = 0; s < t.num_s(); ++s) {
                const auto [err, at] = detail::max_abs_diff(
                    prob_x_given_hS(decode(h, M), decode_subspace(s, M, K), p), x_given_hS(t, h, s));
                track.record("p(x|h,S)", err, tol.conditional,
                             "h=" + std::to_string(h) + " S=" + std::to_string(s) + " i=" + std::to_string(at));
            }
        }
        const std::vector<double> px = marginal_x(t);
        double total = 0.0;
        for (Code x = 0; x < t.num_x(); ++x) {
            const Vector xv = decode(x, D);
            {
                const auto [err, at] = detail::max_abs_diff(detail::gate_probability(xv, p, mutation), h_given_x(t, x));
                track.record("p(h|x)", err, tol.conditional, "x=" + std::to_string(x) + " j=" + std::to_string(at));
            }
            for (Code h = 0; h < t.num_h(); ++h) {
                const Matrix closed = prob_S_given_xh(xv, decode(h, M), p);
                const Matrix exact  = S_given_xh(t, x, h);
                const double err = (closed - exact).cwiseAbs().maxCoeff();
                track.record("p(S|x,h)", err, tol.conditional, "x=" + std::to_string(x) + " h=" + std::to_string(h));
            }
            const double closed_px = std::exp(-free_energy(xv, p) - t.log_partition());
            track.record("exp(-F(x))/Z", std::abs(closed_px - px[x]), tol.marginal, "x=" + std::to_string(x));
            total += px[x];

            const GradientStats pos   = positive_stats(xv, p);
            const GradientStats exact = clamped_expectations(t, x);
            const double err = (pos.flatten() - exact.flatten()).cwiseAbs().maxCoeff();
            track.record("clamped statistics", err, tol.conditional, "x=" + std::to_string(x));
        }
        track.record("sum_x p(x) = 1", std::abs(total - 1.0), tol.normalization, "");

        for (Code h = 0; h < t.num_h(); ++h) {
            const Vector hv = decode(h, M);
            std::vector<double> logu(t.num_x());
            for (Code x = 0; x < t.num_x(); ++x) logu[x] = log_unnorm_p_x_given_h(decode(x, D), hv, p);
            const double norm = log_sum_exp(logu);
            const std::vector<double> exact = x_given_h(t, h);
            for (Code x = 0; x < t.num_x(); ++x) {
                track.record("p(x|h) with S summed out", std::abs(std::exp(logu[x] - norm) - exact[x]), tol.marginal,
                             "h=" + std::to_string(h) + " x=" + std::to_string(x));
            }
        }

        // Gradient of the exact log-likelihood of three data points against central differences.
        Rng data_rng(model_seed ^ 0xda7aULL);
        std::vector<Vector> data;
        for (int n = 0; n < 3; ++n) {
            Vector x(D);
            for (Eigen::Index i = 0; i < D; ++i) x[i] = data_rng.bernoulli(0.5) ? 1.0 : 0.0;
            data.push_back(x);
        }
        const Vector analytic = exact_loglik_and_grad(data, p).gradient.flatten();
        const Vector numeric =
            finite_diff_grad([&](const ModelParams& q) { return exact_log_likelihood(data, q); }, p, tol.fd_epsilon)
                .flatten();
        double worst = 0.0;
        Eigen::Index worst_at = 0;
        for (Eigen::Index c = 0; c < analytic.size(); ++c) {
            const double scale = std::max({std::abs(analytic[c]), std::abs(numeric[c]), 1.0});
            const double rel   = std::abs(analytic[c] - numeric[c]) / scale;
            if (!(rel <= worst)) {
                worst    = rel;
                worst_at = c;
            }
        }
        track.record("log-likelihood gradient vs finite differences", worst, tol.gradient_rel,
                     "coordinate " + std::to_string(worst_at));
    }
    return report;
}

inline void print_check_report(std::ostream& os, const CheckReport& r) {
    os << "oracle check: " << r.trials << " random tiny models\n";
    for (const auto& w : r.worst) {
        os << "  worst " << w.check << ": " << w.error << " (trial " << w.trial << ", model seed " << w.model_seed;
        if (!w.where.empty()) os << ", " << w.where;
        os << ")\n";
    }
    if (r.passed()) {
        os << "PASS\n";
        return;
    }
    os << "FAIL: " << r.failures.size() << " tolerance breaches\n";
    const std::size_t shown = std::min<std::size_t>(r.failures.size(), 10);
    for (std::size_t n = 0; n < shown; ++n) {
        const auto& f = r.failures[n];
        os << "  " << f.check << " error " << f.error << " at trial " << f.trial << " (model seed " << f.model_seed
           << ", " << f.where << ")\n";
    }
}

} // namespace srbm::oracle
