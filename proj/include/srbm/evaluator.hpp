#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "srbm/mnist.hpp"
#include "srbm/model.hpp"
#include "srbm/rbm.hpp"

namespace srbm {

namespace detail {

/// Sum of per-example errors in sorted order, so the mean does not depend on dataset order.
inline double order_free_mean(std::vector<double> terms) {
    std::sort(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms) {
        acc += t;
    }
    return acc / double(terms.size());
}

inline std::vector<double> squared_row_errors(const Matrix& X, const Matrix& recon) {
    std::vector<double> err(std::size_t(X.rows()));
    for (Eigen::Index n = 0; n < X.rows(); ++n) {
        err[std::size_t(n)] = (X.row(n) - recon.row(n)).squaredNorm();
    }
    return err;
}

inline void check_eval_input(const Matrix& X, Eigen::Index D) {
    if (X.rows() == 0) {
        throw std::invalid_argument("reconstruction_error: empty dataset");
    }
    require_size(X.cols(), D, "dataset columns");
}

} // namespace detail

/*!
 * \brief Deterministic mean-field reconstruction of each row of X.
 *
 * q = p(h|x), E[h_j s_jk | x] = q_j sigm(a_jk), m = sigm(W E[hs] + b).
 */
inline Matrix reconstruct(const Matrix& X, const ModelParams& p) {
    const auto M = p.shape.M();
    const auto K = p.shape.K();
    const Matrix A = batch_activations(X, p);
    const Matrix Q = sigmoid(detail::gate_logits(A, p));
    Matrix HS = sigmoid(A);
    for (Eigen::Index n = 0; n < HS.rows(); ++n) {
        for (Eigen::Index j = 0; j < M; ++j) {
            HS.row(n).segment(j * K, K) *= Q(n, j);
        }
    }
    Matrix V = HS * p.W.transpose();
    V.rowwise() += p.visible_bias.transpose();
    return sigmoid(V);
}

inline Matrix reconstruct(const Matrix& X, const RbmParams& p) {
    Matrix V = rbm_batch_prob_h_given_x(X, p) * p.W.transpose();
    V.rowwise() += p.visible_bias.transpose();
    return sigmoid(V);
}

/// Mean over examples of sum_i (x_i - m_i)^2.
inline double reconstruction_error(const ModelParams& p, const Matrix& X) {
    if (!p.finite()) {
        throw NumericalError("reconstruction_error: model has non-finite parameters");
    }
    detail::check_eval_input(X, p.shape.D());
    return detail::order_free_mean(detail::squared_row_errors(X, reconstruct(X, p)));
}

inline double reconstruction_error(const RbmParams& p, const Matrix& X) {
    if (!p.finite()) {
        throw NumericalError("reconstruction_error: model has non-finite parameters");
    }
    detail::check_eval_input(X, p.D());
    return detail::order_free_mean(detail::squared_row_errors(X, reconstruct(X, p)));
}

/// Row n = prob_h_given_x(row n of X), computed by the same per-example routine.
inline Matrix gate_features(const ModelParams& p, const Matrix& X) {
    require_size(X.cols(), p.shape.D(), "dataset columns");
    Matrix F(X.rows(), p.shape.M());
    for (Eigen::Index n = 0; n < X.rows(); ++n) {
        F.row(n) = prob_h_given_x(X.row(n).transpose(), p).transpose();
    }
    return F;
}

inline Matrix gate_features(const RbmParams& p, const Matrix& X) {
    require_size(X.cols(), p.D(), "dataset columns");
    Matrix F(X.rows(), p.M());
    for (Eigen::Index n = 0; n < X.rows(); ++n) {
        F.row(n) = rbm_prob_h_given_x(X.row(n).transpose(), p).transpose();
    }
    return F;
}

/// Mean count of gates with p(h_j = 1 | x) > 0.5 (strict).
inline double mean_active_units_from_features(const Matrix& features) {
    if (features.rows() == 0) {
        return 0.0;
    }
    const double active = (features.array() > 0.5).cast<double>().sum();
    return active / double(features.rows());
}

template <typename Params>
double mean_active_units(const Params& p, const Matrix& X) {
    return mean_active_units_from_features(gate_features(p, X));
}

// ---------------------------------------------------------------------------
// Multinomial logistic regression on gate features

inline constexpr int num_classes = 10;

struct LogRegModel {
    Matrix weights; ///< features x classes
    Vector biases;  ///< classes
    double lambda = 0.0;
    int iterations = 0;
    double gradient_norm = 0.0;
    bool converged = false;
};

struct LogRegOptions {
    double tolerance = 1e-5;
    int max_iterations = 5000;
};

namespace detail {

inline void check_labels(const Matrix& features, const std::vector<int>& labels) {
    require_size(Eigen::Index(labels.size()), features.rows(), "labels");
    for (int y : labels) {
        if (y < 0 || y >= num_classes) {
            throw std::invalid_argument("label out of range: " + std::to_string(y));
        }
    }
}

/// Row-wise softmax of features * W + b.
inline Matrix softmax_probs(const Matrix& features, const Matrix& W, const Vector& b) {
    Matrix Z = features * W;
    Z.rowwise() += b.transpose();
    for (Eigen::Index n = 0; n < Z.rows(); ++n) {
        const double hi = Z.row(n).maxCoeff();
        Z.row(n) = (Z.row(n).array() - hi).exp();
        Z.row(n) /= Z.row(n).sum();
    }
    return Z;
}

} // namespace detail

/// Mean cross-entropy plus lambda * ||W||^2 / 2 (biases unregularized).
inline double logreg_loss(const Matrix& W, const Vector& b, const Matrix& features, const std::vector<int>& labels,
                          double lambda) {
    Matrix Z = features * W;
    Z.rowwise() += b.transpose();
    double loss = 0.0;
    for (Eigen::Index n = 0; n < Z.rows(); ++n) {
        const double hi = Z.row(n).maxCoeff();
        const double lse = hi + std::log((Z.row(n).array() - hi).exp().sum());
        loss += lse - Z(n, labels[std::size_t(n)]);
    }
    return loss / double(Z.rows()) + 0.5 * lambda * W.squaredNorm();
}

struct LogRegGradient {
    Matrix W;
    Vector b;

    double norm() const { return std::sqrt(W.squaredNorm() + b.squaredNorm()); }
};

inline LogRegGradient logreg_gradient(const Matrix& W, const Vector& b, const Matrix& features,
                                      const std::vector<int>& labels, double lambda) {
    Matrix P = detail::softmax_probs(features, W, b);
    for (Eigen::Index n = 0; n < P.rows(); ++n) {
        P(n, labels[std::size_t(n)]) -= 1.0;
    }
    const double inv = 1.0 / double(P.rows());
    return {features.transpose() * P * inv + lambda * W, P.colwise().sum().transpose() * inv};
}

/*!
 * \brief Full-batch gradient descent with fixed block step sizes.
 *
 * The softmax Hessian is at most 0.5 I per example, so the loss Hessian is bounded
 * by the block-diagonal matrix diag(lambda_max(F^T F / N) + lambda, 1). Weights step
 * by the inverse of the first block, biases by the inverse of the second; the top
 * eigenvalue comes from power iteration. Stops when the gradient norm drops below
 * tolerance or after max_iterations; `converged` records which.
 */
inline LogRegModel fit_logreg(const Matrix& features, const std::vector<int>& labels, double lambda,
                              const LogRegOptions& opt = {}) {
    detail::check_labels(features, labels);
    if (features.rows() == 0) {
        throw std::invalid_argument("fit_logreg: no examples");
    }
    if (!features.allFinite()) {
        throw NumericalError("fit_logreg: non-finite features");
    }
    const auto N = features.rows();
    const auto F = features.cols();

    const Matrix gram = features.transpose() * features / double(N);
    Vector v = Vector::Ones(F).normalized();
    double top = 0.0;
    for (int it = 0; it < 200 && F > 0; ++it) {
        Vector w = gram * v;
        top = w.norm();
        if (top == 0.0) {
            break;
        }
        v = w / top;
    }
    const double weight_step = 1.0 / (1.01 * (top + lambda));
    const double bias_step   = 1.0 / 1.01;

    LogRegModel m;
    m.lambda  = lambda;
    m.weights = Matrix::Zero(F, num_classes);
    m.biases  = Vector::Zero(num_classes);
    for (m.iterations = 0; m.iterations < opt.max_iterations; ++m.iterations) {
        const LogRegGradient g = logreg_gradient(m.weights, m.biases, features, labels, lambda);
        m.gradient_norm = g.norm();
        if (m.gradient_norm < opt.tolerance) {
            m.converged = true;
            break;
        }
        m.weights -= weight_step * g.W;
        m.biases -= bias_step * g.b;
    }
    if (!m.converged) {
        m.gradient_norm = logreg_gradient(m.weights, m.biases, features, labels, lambda).norm();
        m.converged     = m.gradient_norm < opt.tolerance;
    }
    return m;
}

/// argmax per row, ties to the lowest class index.
inline std::vector<int> predict(const LogRegModel& m, const Matrix& features) {
    Matrix Z = features * m.weights;
    Z.rowwise() += m.biases.transpose();
    std::vector<int> out(std::size_t(Z.rows()));
    for (Eigen::Index n = 0; n < Z.rows(); ++n) {
        int best = 0;
        for (int c = 1; c < Z.cols(); ++c) {
            if (Z(n, c) > Z(n, best)) {
                best = c;
            }
        }
        out[std::size_t(n)] = best;
    }
    return out;
}

/// Percentage of rows whose argmax prediction differs from the label.
inline double classification_error(const LogRegModel& m, const Matrix& features, const std::vector<int>& labels) {
    detail::check_labels(features, labels);
    if (labels.empty()) {
        return 0.0;
    }
    const std::vector<int> pred = predict(m, features);
    std::size_t wrong = 0;
    for (std::size_t n = 0; n < labels.size(); ++n) {
        wrong += pred[n] != labels[n] ? 1 : 0;
    }
    return 100.0 * double(wrong) / double(labels.size());
}

struct LambdaSelection {
    LogRegModel best;
    std::vector<double> lambdas;
    std::vector<double> validation_errors;
};

inline const std::vector<double>& default_lambda_grid() {
    static const std::vector<double> grid{0.0, 0.01, 0.1};
    return grid;
}

/// Fits one model per lambda on the training features and keeps the one with the lowest
/// validation error (first in grid order on ties).
inline LambdaSelection train_logreg(const Matrix& train_features, const std::vector<int>& train_labels,
                                    const Matrix& valid_features, const std::vector<int>& valid_labels,
                                    const std::vector<double>& lambdas = default_lambda_grid(),
                                    const LogRegOptions& opt = {}) {
    if (lambdas.empty()) {
        throw std::invalid_argument("train_logreg: empty lambda grid");
    }
    LambdaSelection sel;
    sel.lambdas = lambdas;
    double best_err = INFINITY;
    for (double lambda : lambdas) {
        LogRegModel m = fit_logreg(train_features, train_labels, lambda, opt);
        const double err = classification_error(m, valid_features, valid_labels);
        sel.validation_errors.push_back(err);
        if (err < best_err) {
            best_err = err;
            sel.best = std::move(m);
        }
    }
    return sel;
}

// ---------------------------------------------------------------------------
// Reports

struct MetricsReport {
    std::string model_id;
    std::string kind; ///< "subspace" or "rbm"
    std::optional<int> K;
    int M = 0;
    mnist::SplitSpec split;
    double recon_error = 0.0;
    double classification_error = 0.0; ///< percent
    double mean_active_units = 0.0;
    double selected_lambda = 0.0;
    bool logreg_converged = false;
};

inline std::string metrics_csv_header() {
    return "model_id,kind,M,K,per_digit,split_seed,recon_error,classification_error,mean_active_units,lambda";
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string metrics_csv_line(const MetricsReport& r) {
    std::ostringstream os;
    os << r.model_id << ',' << r.kind << ',' << r.M << ',' << (r.K ? std::to_string(*r.K) : std::string()) << ','
       << r.split.per_digit_train << ',' << r.split.seed.value << ',' << format_double(r.recon_error) << ','
       << format_double(r.classification_error) << ',' << format_double(r.mean_active_units) << ','
       << format_double(r.selected_lambda);
    return os.str();
}

inline void print_report(std::ostream& os, const MetricsReport& r) {
    char buf[128];
    os << "model                 " << r.model_id << '\n';
    os << "kind                  " << r.kind << " (M=" << r.M;
    if (r.K) {
        os << ", K=" << *r.K;
    }
    os << ")\n";
    os << "training examples     " << r.split.train_size() << " (" << r.split.per_digit_train << " per digit)\n";
    std::snprintf(buf, sizeof buf, "%.4f", r.recon_error);
    os << "reconstruction error  " << buf << '\n';
    std::snprintf(buf, sizeof buf, "%.2f %% (lambda = %g%s)", r.classification_error, r.selected_lambda,
                  r.logreg_converged ? "" : ", not converged");
    os << "classification error  " << buf << '\n';
    std::snprintf(buf, sizeof buf, "%.2f", r.mean_active_units);
    os << "active gate units     " << buf << '\n';
}

} // namespace srbm
