#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "costgcn/numerics.hpp"
#include "oracles.hpp"

using namespace costgcn;

TEST(Matmul, MatchesTripleLoopExactly) {
    for (std::uint32_t seed = 0; seed < 20; ++seed) {
        const Tensor a = oracle::rand({5, 7}, seed), b = oracle::rand({7, 3}, seed + 100);
        EXPECT_EQ(max_abs_diff(matmul(a, b), oracle::matmul_loops(a, b)), 0.0f) << "seed " << seed;
    }
}

TEST(Matmul, HandExamples) {
    EXPECT_EQ(matmul(Tensor::identity(2), Tensor::matrix({{1, 2}, {3, 4}})), Tensor::matrix({{1, 2}, {3, 4}}));
    EXPECT_EQ(matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}})), Tensor::matrix({{11}}));
}

TEST(Matmul, IdentityIsExact) {
    const Tensor x = oracle::rand({6, 9}, 3);
    EXPECT_EQ(matmul(Tensor::identity(6), x), x);
}

TEST(Matmul, RejectsInnerMismatch) {
    EXPECT_THROW(matmul(Tensor({2, 3}), Tensor({4, 2})), DimensionError);
    EXPECT_THROW(matmul(Tensor({2, 3, 1}), Tensor({3, 2})), DimensionError);
}

TEST(Relu, Examples) {
    EXPECT_EQ(relu(Tensor::vector({-1, 0, 2})), Tensor::vector({0, 0, 2}));
    EXPECT_EQ(relu(Tensor::vector({-3, -0.5f})), Tensor::vector({0, 0}));
    const Tensor pos = oracle::rand({4, 4}, 1, 0.0f, 5.0f);
    EXPECT_EQ(relu(pos), pos);
}

TEST(BatchNorm, MatchesScalarLoop) {
    const std::size_t C = 4, N = 6;
    const Tensor x = oracle::rand({C, 2, 3}, 7, -3, 3);
    BatchNorm bn{oracle::rand({C}, 8, 0.5f, 2), oracle::rand({C}, 9), oracle::rand({C}, 10), oracle::rand({C}, 11, 0.1f, 2)};
    const Tensor y = batchnorm_inference(x, bn);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < N; ++i) {
            const double ref = double(bn.gamma[c]) * (x[c * N + i] - double(bn.mean[c])) /
                                   std::sqrt(double(bn.var[c]) + bn.eps) + bn.beta[c];
            EXPECT_NEAR(y[c * N + i], ref, 1e-6);
        }
}

TEST(BatchNorm, HandExamples) {
    const Tensor x = oracle::rand({3, 5}, 2);
    EXPECT_EQ(batchnorm_inference(x, BatchNorm::identity(3)), x);
    BatchNorm bn{Tensor::vector({2}), Tensor::vector({1}), Tensor::vector({0}), Tensor::vector({1}), 0.0f};
    EXPECT_EQ(batchnorm_inference(Tensor::vector({3}).reshaped({1, 1}), bn)[0], 7.0f);
}

TEST(BatchNorm, RejectsLengthMismatch) {
    EXPECT_THROW(batchnorm_inference(Tensor({3, 2}), BatchNorm::identity(2)), DimensionError);
}

TEST(Softmax, MatchesDirectFormula) {
    const Tensor x = oracle::rand({5, 8}, 4, -4, 4);
    const Tensor y = softmax_rows(x);
    for (std::size_t i = 0; i < 5; ++i) {
        std::vector<double> row;
        for (std::size_t j = 0; j < 8; ++j) row.push_back(x(i, j));
        const auto ref = oracle::softmax(row);
        double sum = 0.0;
        for (std::size_t j = 0; j < 8; ++j) {
            EXPECT_NEAR(y(i, j), ref[j], 1e-6);
            sum += y(i, j);
        }
        EXPECT_NEAR(sum, 1.0, 1e-6);
    }
}

TEST(Softmax, StableAndShiftInvariant) {
    EXPECT_EQ(softmax_rows(Tensor::matrix({{0, 0}})), Tensor::matrix({{0.5f, 0.5f}}));
    EXPECT_EQ(softmax_rows(Tensor::matrix({{1000, 1000}})), Tensor::matrix({{0.5f, 0.5f}}));
    const Tensor x = oracle::rand({3, 6}, 5, -2, 2);
    Tensor shifted = x;
    for (float& v : shifted.data()) v += 37.0f;
    EXPECT_LE(max_abs_diff(softmax_rows(x), softmax_rows(shifted)), 1e-6f);
}

TEST(TensorType, ShapeContract) {
    EXPECT_THROW(Tensor({2, 3}, std::vector<float>(5)), DimensionError);
    Tensor t({2, 3, 4});
    EXPECT_EQ(t.size(), 24u);
    t(1, 2, 3) = 5.0f;
    EXPECT_EQ(t[23], 5.0f);
    EXPECT_EQ(t.reshaped({6, 4})(5, 3), 5.0f);
}

TEST(TensorType, MaxAbsDiffFlagsNan) {
    Tensor a({2}), b({2});
    b[1] = std::numeric_limits<float>::quiet_NaN();
    EXPECT_FALSE(max_abs_diff(a, b) <= 1.0f);
}
