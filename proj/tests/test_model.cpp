#include <cstring>
#include <sstream>

#include <gtest/gtest.h>

#include "srbm/model.hpp"
#include "srbm/oracle.hpp"
#include "test_support.hpp"

using namespace srbm;
namespace tu = srbm::test_util;
using srbm::test_util::fixed_tiny_model;
using srbm::test_util::random_model;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(Eigen::Index(v.size()));
    Eigen::Index i = 0;
    for (double d : v) out[i++] = d;
    return out;
}

} // namespace

TEST(Energy, ZeroParamsGiveZero) {
    const ModelParams p = ModelParams::zeros({4, 3, 2});
    Rng rng(1);
    for (int t = 0; t < 10; ++t) {
        EXPECT_EQ(energy(tu::random_binary(4, rng), tu::random_binary(3, rng),
                         tu::random_binary(3, 2, rng), p),
                  0.0);
    }
}

TEST(Energy, SingleUnitHandEvaluation) {
    ModelParams p = ModelParams::zeros({1, 1, 1});
    p.W(0, 0)             = 2.0;
    p.visible_bias[0]     = -1.0;
    p.gate_bias[0]        = 0.5;
    p.subspace_bias(0, 0) = 0.25;
    const Vector one = Vector::Ones(1);
    EXPECT_DOUBLE_EQ(energy(one, one, Matrix::Ones(1, 1), p), -1.75);
}

TEST(Energy, FixedModelMatchesFrozenReference) {
    const ModelParams p = fixed_tiny_model();
    Matrix S(2, 2);
    S << 1, 0, 0, 1;
    EXPECT_NEAR(energy(vec({1, 0, 1}), vec({1, 1}), S, p), -2.5499999999999998, 1e-14);
}

TEST(Energy, MatchesTripleLoopOnRandomStates) {
    Rng rng(7);
    for (int t = 0; t < 50; ++t) {
        const ModelParams p = random_model({3, 2, 2}, 100 + t);
        const Vector x = tu::random_binary(3, rng);
        const Vector h = tu::random_binary(2, rng);
        const Matrix S = tu::random_binary(2, 2, rng);
        EXPECT_NEAR(energy(x, h, S, p), oracle::reference_energy(x, h, S, p), 1e-12);
    }
}

TEST(Energy, InvariantUnderGateRelabeling) {
    // Swapping gates 0 and 1 together with W, c, D, h and S leaves E unchanged.
    const ModelParams p = random_model({4, 2, 3}, 11);
    ModelParams q = p;
    const auto K = p.shape.K();
    q.W.middleCols(0, K) = p.W.middleCols(K, K);
    q.W.middleCols(K, K) = p.W.middleCols(0, K);
    q.gate_bias << p.gate_bias[1], p.gate_bias[0];
    q.subspace_bias.row(0) = p.subspace_bias.row(1);
    q.subspace_bias.row(1) = p.subspace_bias.row(0);
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const Vector x = tu::random_binary(4, rng);
        const Vector h = tu::random_binary(2, rng);
        const Matrix S = tu::random_binary(2, 3, rng);
        Vector h2(2);
        h2 << h[1], h[0];
        Matrix S2(2, 3);
        S2.row(0) = S.row(1);
        S2.row(1) = S.row(0);
        EXPECT_NEAR(energy(x, h, S, p), energy(x, h2, S2, q), 1e-12);
    }
}

TEST(Energy, ShapeMismatchThrows) {
    const ModelParams p = ModelParams::zeros({3, 2, 2});
    EXPECT_THROW(energy(Vector::Zero(4), Vector::Zero(2), Matrix::Zero(2, 2), p), DimensionError);
    EXPECT_THROW(energy(Vector::Zero(3), Vector::Zero(1), Matrix::Zero(2, 2), p), DimensionError);
    EXPECT_THROW(energy(Vector::Zero(3), Vector::Zero(2), Matrix::Zero(2, 3), p), DimensionError);
    EXPECT_THROW(ModelParams::zeros({0, 1, 1}), DimensionError);
}

TEST(Activations, ZeroWeightsOrZeroInputGiveSubspaceBias) {
    ModelParams p = random_model({5, 3, 2}, 5);
    EXPECT_EQ(activations(Vector::Zero(5), p), p.subspace_bias);
    p.W.setZero();
    EXPECT_EQ(activations(Vector::Ones(5), p), p.subspace_bias);
}

TEST(Activations, MatchScalarLoop) {
    const ModelParams p = random_model({5, 3, 2}, 6);
    Rng rng(2);
    const Vector x = tu::random_binary(5, rng);
    const Matrix a = activations(x, p);
    for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 2; ++k) {
            double s = p.subspace_bias(j, k);
            for (int i = 0; i < 5; ++i) s += p.weight(i, j, k) * x[i];
            EXPECT_NEAR(a(j, k), s, 1e-13);
        }
    }
}

TEST(Conditionals, ZeroParamsAreHalf) {
    const ModelParams p = ModelParams::zeros({4, 3, 2});
    Rng rng(4);
    const Vector x = tu::random_binary(4, rng);
    const Vector h = tu::random_binary(3, rng);
    const Matrix S = tu::random_binary(3, 2, rng);
    EXPECT_TRUE((prob_x_given_hS(h, S, p).array() == 0.5).all());
    EXPECT_TRUE((prob_S_given_xh(x, h, p).array() == 0.5).all());
    // softplus(0) * K cancels the -K log 2 penalty.
    EXPECT_TRUE((prob_h_given_x(x, p).array() - 0.5).abs().maxCoeff() < 1e-15);
}

TEST(Conditionals, VisibleBiasOnly) {
    ModelParams p = ModelParams::zeros({2, 1, 1});
    p.visible_bias[0] = 5.0;
    const Vector pr = prob_x_given_hS(Vector::Ones(1), Matrix::Ones(1, 1), p);
    EXPECT_NEAR(pr[0], 0.9933071490757153, 1e-15);
    EXPECT_EQ(pr[1], 0.5);
}

TEST(Conditionals, ClosedGateRowIsExactlyHalf) {
    const ModelParams p = random_model({4, 3, 3}, 8, 5.0);
    Rng rng(9);
    for (int t = 0; t < 20; ++t) {
        const Vector x = tu::random_binary(4, rng);
        Vector h = tu::random_binary(3, rng);
        h[1] = 0.0;
        const Matrix pr = prob_S_given_xh(x, h, p);
        EXPECT_TRUE((pr.row(1).array() == 0.5).all());
    }
}

TEST(Conditionals, OpenGateWithZeroWeightsIsHalf) {
    const ModelParams p = ModelParams::zeros({3, 2, 2});
    EXPECT_TRUE((prob_S_given_xh(Vector::Ones(3), Vector::Ones(2), p).array() == 0.5).all());
}

TEST(Conditionals, PenaltyCancelsWithZeroWeights) {
    ModelParams p = ModelParams::zeros({3, 4, 5});
    p.gate_bias << 10.0, -2.0, 0.3, 0.0;
    const Vector q = prob_h_given_x(Vector::Ones(3), p);
    EXPECT_NEAR(q[0], 0.99995460213129761, 1e-15);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(q[j], sigmoid(p.gate_bias[j]), 1e-15);
}

TEST(Conditionals, FixedModelMatchesFrozenReference) {
    const ModelParams p = fixed_tiny_model();
    const Vector q = prob_h_given_x(vec({1, 0, 1}), p);
    EXPECT_NEAR(q[0], 0.6200037777366596, 1e-14);
    EXPECT_NEAR(q[1], 0.73847639588399394, 1e-14);
    Matrix S(2, 2);
    S << 1, 0, 0, 1;
    const Vector px = prob_x_given_hS(vec({1, 1}), S, p);
    EXPECT_NEAR(px[0], 0.80218388855858203, 1e-14);
    EXPECT_NEAR(px[1], 0.1824255238063564, 1e-14);
    EXPECT_NEAR(px[2], 0.7772998611746913, 1e-14);
}

TEST(Conditionals, AgreeWithEnumerationOnRandomTinyModels) {
    for (int t = 0; t < 20; ++t) {
        const ModelParams p = random_model({3, 2, 2}, 200 + t);
        const oracle::Conditionals exact = oracle::exact_conditionals(p);
        for (oracle::Code x = 0; x < 8; ++x) {
            const Vector xv = oracle::decode(x, 3);
            EXPECT_LT((prob_h_given_x(xv, p) - exact.h_given_x[x]).cwiseAbs().maxCoeff(), 1e-10);
            for (oracle::Code h = 0; h < 4; ++h) {
                EXPECT_LT((prob_S_given_xh(xv, oracle::decode(h, 2), p) - exact.S_given_xh[x][h]).cwiseAbs().maxCoeff(),
                          1e-10);
            }
        }
        for (oracle::Code h = 0; h < 4; ++h) {
            for (oracle::Code s = 0; s < 16; ++s) {
                const Vector pr = prob_x_given_hS(oracle::decode(h, 2), oracle::decode_subspace(s, 2, 2), p);
                EXPECT_LT((pr - exact.x_given_hS[h][s]).cwiseAbs().maxCoeff(), 1e-10);
            }
        }
    }
}

TEST(MarginalizedConditional, ZeroParamsGiveMKLog2) {
    const ModelParams p = ModelParams::zeros({3, 2, 4});
    Rng rng(1);
    EXPECT_NEAR(log_unnorm_p_x_given_h(tu::random_binary(3, rng), tu::random_binary(2, rng), p), 8 * ln2,
                1e-14);
}

TEST(MarginalizedConditional, ClosedGatesLeaveVisibleBias) {
    const ModelParams p = random_model({4, 3, 2}, 12);
    Rng rng(2);
    const Vector x = tu::random_binary(4, rng);
    EXPECT_NEAR(log_unnorm_p_x_given_h(x, Vector::Zero(3), p), p.visible_bias.dot(x) + 6 * ln2, 1e-13);
}

TEST(MarginalizedConditional, NormalizesToEnumeratedDistribution) {
    for (int t = 0; t < 20; ++t) {
        const ModelParams p = random_model({3, 2, 3}, 300 + t);
        const oracle::JointTable table(p);
        for (oracle::Code h = 0; h < 4; ++h) {
            std::vector<double> logu(8);
            for (oracle::Code x = 0; x < 8; ++x) logu[x] = log_unnorm_p_x_given_h(oracle::decode(x, 3), oracle::decode(h, 2), p);
            const double norm = log_sum_exp(logu);
            const std::vector<double> exact = oracle::x_given_h(table, h);
            for (oracle::Code x = 0; x < 8; ++x) EXPECT_NEAR(std::exp(logu[x] - norm), exact[x], 1e-10);
        }
    }
}

TEST(FreeEnergy, ZeroParams) {
    const ModelParams p = ModelParams::zeros({5, 3, 2});
    Rng rng(5);
    for (int t = 0; t < 5; ++t) {
        EXPECT_NEAR(free_energy(tu::random_binary(5, rng), p), -3.0 * 3.0 * ln2, 1e-13);
    }
}

TEST(FreeEnergy, LinearInVisibleBias) {
    const ModelParams p = random_model({5, 2, 2}, 13);
    ModelParams q = p;
    const double delta = 0.37;
    q.visible_bias.array() += delta;
    Rng rng(6);
    for (int t = 0; t < 10; ++t) {
        const Vector x = tu::random_binary(5, rng);
        EXPECT_NEAR(free_energy(x, q), free_energy(x, p) - delta * x.sum(), 1e-12);
    }
}

TEST(FreeEnergy, FixedModelMatchesFrozenReference) {
    EXPECT_NEAR(free_energy(vec({1, 0, 1}), fixed_tiny_model()), -5.4814134252079558, 1e-13);
    EXPECT_NEAR(oracle::log_partition_function(fixed_tiny_model()), 6.8303945155275656, 1e-13);
}

TEST(FreeEnergy, GivesEnumeratedMarginal) {
    for (int t = 0; t < 20; ++t) {
        const ModelParams p = random_model({4, 2, 2}, 400 + t);
        const oracle::JointTable table(p);
        const std::vector<double> px = oracle::marginal_x(table);
        for (oracle::Code x = 0; x < 16; ++x) {
            EXPECT_NEAR(std::exp(-free_energy(oracle::decode(x, 4), p) - table.log_partition()), px[x], 1e-10);
        }
    }
}

TEST(Robustness, LargeParametersStayFinite) {
    for (double scale : {10.0, 100.0, 1000.0}) {
        const ModelParams p = random_model({6, 3, 3}, 17, scale);
        Rng rng(1);
        for (int t = 0; t < 10; ++t) {
            const Vector x = tu::random_binary(6, rng);
            const Vector h = tu::random_binary(3, rng);
            const Matrix S = tu::random_binary(3, 3, rng);
            EXPECT_TRUE(std::isfinite(energy(x, h, S, p)));
            EXPECT_TRUE(prob_x_given_hS(h, S, p).allFinite());
            EXPECT_TRUE(prob_S_given_xh(x, h, p).allFinite());
            const Vector q = prob_h_given_x(x, p);
            EXPECT_TRUE(q.allFinite());
            EXPECT_TRUE(std::isfinite(log_unnorm_p_x_given_h(x, h, p)));
            EXPECT_TRUE(std::isfinite(free_energy(x, p)));
        }
    }
}

TEST(Robustness, GateProbabilityStrictlyInsideUnitIntervalForModerateInputs) {
    for (int t = 0; t < 20; ++t) {
        const ModelParams p = random_model({8, 4, 3}, 500 + t, 2.0);
        Rng rng(t);
        const Vector q = prob_h_given_x(tu::random_binary(8, rng), p);
        EXPECT_TRUE((q.array() > 0.0).all() && (q.array() < 1.0).all());
    }
}

TEST(Softplus, StableBranches) {
    EXPECT_EQ(softplus(1000.0), 1000.0);
    EXPECT_EQ(softplus(31.0), 31.0);
    EXPECT_NEAR(softplus(-31.0), std::exp(-31.0), 1e-30);
    EXPECT_NEAR(softplus(0.0), ln2, 1e-16);
    EXPECT_NEAR(softplus(2.5), std::log1p(std::exp(2.5)), 1e-15);
    EXPECT_EQ(sigmoid(-1000.0), 0.0);
    EXPECT_EQ(sigmoid(1000.0), 1.0);
}

TEST(ModelFile, HeaderLayoutIsBitExact) {
    const ModelParams p = fixed_tiny_model();
    std::ostringstream os;
    write_model(os, p);
    const std::string bytes = os.str();
    ASSERT_EQ(bytes.size(), 5u + 12u + 8u * (12 + 3 + 2 + 4));
    EXPECT_EQ(bytes.substr(0, 4), "SRBM");
    EXPECT_EQ(bytes[4], '\x01');
    EXPECT_EQ(bytes.substr(5, 4), std::string("\x03\x00\x00\x00", 4));
    EXPECT_EQ(bytes.substr(9, 4), std::string("\x02\x00\x00\x00", 4));
    EXPECT_EQ(bytes.substr(13, 4), std::string("\x02\x00\x00\x00", 4));
    // W[0][0][0] = 0.5 is 0x3FE0000000000000 little-endian.
    EXPECT_EQ(bytes.substr(17, 8), std::string("\x00\x00\x00\x00\x00\x00\xe0\x3f", 8));
    // W[0][0][1] = -0.3 follows (k innermost).
    double w001 = 0;
    std::memcpy(&w001, bytes.data() + 25, 8);
    EXPECT_EQ(w001, -0.3);
}

TEST(ModelFile, RoundTripPreservesEveryBit) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const ModelParams p = random_model({7, 3, 4}, seed, 3.0);
        std::stringstream ss;
        write_model(ss, p);
        EXPECT_EQ(read_model(ss), p);
    }
}

TEST(ModelFile, CorruptInputsNameTheField) {
    std::ostringstream os;
    write_model(os, fixed_tiny_model());
    const std::string good = os.str();

    auto error_of = [](const std::string& bytes) {
        std::istringstream in(bytes);
        try {
            read_model(in);
        } catch (const FormatError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(error_of("SRBX" + good.substr(4)).find("magic"), std::string::npos);
    EXPECT_NE(error_of(good.substr(0, 4) + '\x02' + good.substr(5)).find("version"), std::string::npos);
    EXPECT_NE(error_of(good.substr(0, 11)).find("M"), std::string::npos);
    EXPECT_NE(error_of(good.substr(0, 40)).find("W"), std::string::npos);
    EXPECT_NE(error_of(good.substr(0, good.size() - 3)).find("D"), std::string::npos);
    EXPECT_NE(error_of(good + "x").find("trailing"), std::string::npos);
    std::string zero_m = good;
    zero_m[9] = 0;
    EXPECT_NE(error_of(zero_m).find("invalid header"), std::string::npos);
}
