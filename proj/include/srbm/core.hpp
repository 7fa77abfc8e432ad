#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace srbm {

using Vector = Eigen::VectorXd;
/// Row-major so that a flattened third-order tensor (i, j, k) is contiguous in k, then j.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Binary states are stored as 0.0 / 1.0 so they enter the linear algebra directly.
using VisibleVector   = Vector;
using GateVector      = Vector;
using SubspaceMatrix  = Matrix;

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require_size(std::ptrdiff_t actual, std::ptrdiff_t expected, const char* what) {
    if (actual != expected) {
        throw DimensionError(std::string(what) + ": expected size " + std::to_string(expected) + ", got " +
                             std::to_string(actual));
    }
}

inline double sigmoid(double a) {
    if (a >= 0.0) {
        return 1.0 / (1.0 + std::exp(-a));
    }
    const double e = std::exp(a);
    return e / (1.0 + e);
}

/// log(1 + exp(a)) without overflow; outside [-30, 30] the tails are used directly.
inline double softplus(double a) {
    if (a > 30.0) {
        return a;
    }
    if (a < -30.0) {
        return std::exp(a);
    }
    return std::log1p(std::exp(a));
}

inline double log_add_exp(double a, double b) {
    if (a == -INFINITY) {
        return b;
    }
    if (b == -INFINITY) {
        return a;
    }
    const double hi = a > b ? a : b;
    const double lo = a > b ? b : a;
    return hi + std::log1p(std::exp(lo - hi));
}

template <typename Range>
double log_sum_exp(const Range& values) {
    double hi = -INFINITY;
    for (double v : values) {
        hi = v > hi ? v : hi;
    }
    if (hi == -INFINITY) {
        return hi;
    }
    double acc = 0.0;
    for (double v : values) {
        acc += std::exp(v - hi);
    }
    return hi + std::log(acc);
}

template <typename Derived>
typename Derived::PlainObject sigmoid(const Eigen::MatrixBase<Derived>& a) {
    return a.unaryExpr([](double v) { return sigmoid(v); });
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite();
}

template <typename Derived>
bool is_binary(const Eigen::MatrixBase<Derived>& m) {
    return ((m.array() == 0.0) || (m.array() == 1.0)).all();
}

} // namespace srbm
