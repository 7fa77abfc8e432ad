#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "srbm/model.hpp"
#include "srbm/rbm.hpp"
#include "srbm/rng.hpp"

namespace srbm::test_util {

/// D=3, M=2, K=2 model with fixed parameters; reference values in tests/reference/tiny_model_values.py.
inline ModelParams fixed_tiny_model() {
    ModelParams p = ModelParams::zeros({3, 2, 2});
    const double W[3][2][2] = {{{0.5, -0.3}, {0.2, 0.8}}, {{-0.7, 0.1}, {0.4, -0.6}}, {{0.9, 0.3}, {-0.2, 0.05}}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) p.weight(i, j, k) = W[i][j][k];
    p.visible_bias << 0.1, -0.2, 0.3;
    p.gate_bias << -0.4, 0.25;
    p.subspace_bias << 0.15, -0.35, 0.6, -0.1;
    return p;
}

inline ModelParams random_model(Shape s, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    ModelParams p = ModelParams::zeros(s);
    for (Eigen::Index i = 0; i < p.W.size(); ++i) p.W.data()[i] = scale * rng.normal();
    for (Eigen::Index i = 0; i < p.visible_bias.size(); ++i) p.visible_bias[i] = scale * rng.normal();
    for (Eigen::Index i = 0; i < p.gate_bias.size(); ++i) p.gate_bias[i] = scale * rng.normal();
    for (Eigen::Index i = 0; i < p.subspace_bias.size(); ++i) p.subspace_bias.data()[i] = scale * rng.normal();
    return p;
}

inline RbmParams random_rbm(Eigen::Index D, Eigen::Index M, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    RbmParams p = RbmParams::zeros(D, M);
    for (Eigen::Index i = 0; i < p.W.size(); ++i) p.W.data()[i] = scale * rng.normal();
    for (Eigen::Index i = 0; i < D; ++i) p.visible_bias[i] = scale * rng.normal();
    for (Eigen::Index j = 0; j < M; ++j) p.hidden_bias[j] = scale * rng.normal();
    return p;
}

inline Vector random_binary(Eigen::Index n, Rng& rng) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    return v;
}

inline Matrix random_binary(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    return m;
}

inline double cosine(const Vector& a, const Vector& b) { return a.dot(b) / (a.norm() * b.norm()); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("srbm_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace srbm::test_util
