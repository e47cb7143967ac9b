#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

#include "costgcn/tensor.hpp"

namespace costgcn {

namespace detail {

// c[m x n] += a[m x k] * b[k x n], all row-major. For every output element the
// products are summed in ascending k, the same order as the textbook loop.
inline void gemm_acc(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
                     std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        float* crow = c + i * n;
        const float* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const float av = arow[p];
            const float* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace detail

// a[m x k] * b[k x n] -> [m x n]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                             shape_str(b.shape()));
    }
    Tensor c({a.dim(0), b.dim(1)});
    detail::gemm_acc(a.data().data(), b.data().data(), c.data().data(), a.dim(0), a.dim(1), b.dim(1));
    return c;
}

inline Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw DimensionError("transpose: expected a matrix, got " + shape_str(a.shape()));
    Tensor t({a.dim(1), a.dim(0)});
    for (std::size_t i = 0; i < a.dim(0); ++i)
        for (std::size_t j = 0; j < a.dim(1); ++j) t(j, i) = a(i, j);
    return t;
}

inline void relu_inplace(Tensor& x) {
    for (float& v : x.data()) v = v > 0.0f ? v : 0.0f;
}

inline Tensor relu(Tensor x) {
    relu_inplace(x);
    return x;
}

inline void add_inplace(Tensor& acc, const Tensor& x) {
    if (acc.shape() != x.shape()) {
        throw DimensionError("add: shape " + shape_str(acc.shape()) + " vs " + shape_str(x.shape()));
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

inline constexpr float kBatchNormEps = 1e-5f;

// Inference-mode batch norm parameters for C channels.
struct BatchNorm {
    Tensor gamma, beta, mean, var;
    float eps = kBatchNormEps;

    static BatchNorm identity(std::size_t channels) {
        return {Tensor({channels}, 1.0f), Tensor({channels}, 0.0f), Tensor({channels}, 0.0f),
                Tensor({channels}, 1.0f), 0.0f};
    }

    std::size_t channels() const { return gamma.size(); }
};

// x is channel-first [C x ...]; channel c is normalised with the c-th statistics.
inline void batchnorm_inplace(Tensor& x, const BatchNorm& bn) {
    const std::size_t C = bn.gamma.size();
    if (bn.beta.size() != C || bn.mean.size() != C || bn.var.size() != C) {
        throw DimensionError("batchnorm: parameter lengths disagree");
    }
    if (x.rank() == 0 || x.dim(0) != C) {
        throw DimensionError("batchnorm: input " + shape_str(x.shape()) + " has no leading dim " +
                             std::to_string(C));
    }
    const std::size_t inner = x.size() / C;
    for (std::size_t c = 0; c < C; ++c) {
        const float scale = bn.gamma[c] / std::sqrt(bn.var[c] + bn.eps);
        const float shift = bn.beta[c] - scale * bn.mean[c];
        float* p = x.data().data() + c * inner;
        for (std::size_t i = 0; i < inner; ++i) p[i] = p[i] * scale + shift;
    }
}

inline Tensor batchnorm_inference(Tensor x, const BatchNorm& bn) {
    batchnorm_inplace(x, bn);
    return x;
}

inline void softmax_span(std::span<float> row) {
    if (row.empty()) return;
    const float mx = *std::max_element(row.begin(), row.end());
    float sum = 0.0f;
    for (float& v : row) {
        v = std::exp(v - mx);
        sum += v;
    }
    const float inv = 1.0f / sum;
    for (float& v : row) v *= inv;
}

// Row-wise softmax of an [m x n] matrix.
inline Tensor softmax_rows(Tensor x) {
    if (x.rank() != 2) throw DimensionError("softmax_rows: expected a matrix, got " + shape_str(x.shape()));
    const std::size_t n = x.dim(1);
    for (std::size_t i = 0; i < x.dim(0); ++i) softmax_span(x.data().subspan(i * n, n));
    return x;
}

}  // namespace costgcn
