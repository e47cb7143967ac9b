#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "costgcn/numerics.hpp"
#include "costgcn/tensor.hpp"

namespace costgcn {

// Immutable temporal kernel (K x 1 over the vertex axis), shared between the
// clip path and every stream. Taps run oldest -> newest: tap K-1 weights the
// newest frame of the causal window.
struct TemporalKernel {
    Tensor kernel;   // [C_out, C_in, K]
    Tensor bias;     // [C_out]
    Tensor stacked;  // [K, C_out, C_in], one matrix per tap
    std::size_t stride = 1;
    std::size_t dilation = 1;

    std::size_t c_out() const { return kernel.dim(0); }
    std::size_t c_in() const { return kernel.dim(1); }
    std::size_t taps() const { return kernel.dim(2); }
    // Receptive extent (K-1)*d + 1.
    std::size_t extent() const { return (taps() - 1) * dilation + 1; }
};

inline std::shared_ptr<const TemporalKernel> make_temporal_kernel(Tensor kernel, Tensor bias,
                                                                  std::size_t stride = 1,
                                                                  std::size_t dilation = 1) {
    if (kernel.rank() != 3 || kernel.dim(2) == 0) {
        throw DimensionError("temporal kernel must be [C_out, C_in, K>=1], got " + shape_str(kernel.shape()));
    }
    if (stride == 0 || dilation == 0) throw ConfigError("temporal kernel: stride and dilation must be >= 1");
    expect_shape(bias, {kernel.dim(0)}, "temporal bias");
    const std::size_t co = kernel.dim(0), ci = kernel.dim(1), K = kernel.dim(2);
    Tensor stacked({K, co, ci});
    for (std::size_t o = 0; o < co; ++o)
        for (std::size_t i = 0; i < ci; ++i)
            for (std::size_t k = 0; k < K; ++k) stacked(k, o, i) = kernel(o, i, k);
    return std::make_shared<const TemporalKernel>(
        TemporalKernel{std::move(kernel), std::move(bias), std::move(stacked), stride, dilation});
}

inline std::size_t conv_output_length(std::size_t T, std::size_t extent, std::size_t stride,
                                      std::size_t padding) {
    const std::size_t padded = T + 2 * padding;
    if (padded < extent) return 0;
    return (padded - extent) / stride + 1;
}

// Regular (clip) temporal convolution of x [C_in, T, V] with symmetric zero
// padding. Returns nullopt when the padded sequence is shorter than the kernel.
inline std::optional<Tensor> temporal_conv_clip(const Tensor& x, const TemporalKernel& tk,
                                                std::size_t padding = 0) {
    if (x.rank() != 3 || x.dim(0) != tk.c_in()) {
        throw DimensionError("temporal_conv_clip: input " + shape_str(x.shape()) + " does not match C_in=" +
                             std::to_string(tk.c_in()));
    }
    const std::size_t ci = x.dim(0), T = x.dim(1), V = x.dim(2), co = tk.c_out();
    const std::size_t To = conv_output_length(T, tk.extent(), tk.stride, padding);
    if (To == 0) return std::nullopt;

    // Each tap's product is formed separately and then added, oldest tap first,
    // which is the order the streaming ring accumulates in.
    Tensor y({co, To, V});
    std::vector<float> gathered(ci * To * V);
    std::vector<float> tap(co * To * V);
    for (std::size_t k = 0; k < tk.taps(); ++k) {
        std::fill(gathered.begin(), gathered.end(), 0.0f);
        for (std::size_t c = 0; c < ci; ++c) {
            for (std::size_t t = 0; t < To; ++t) {
                const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * tk.stride + k * tk.dilation) -
                                           static_cast<std::ptrdiff_t>(padding);
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
                const float* from = &x(c, static_cast<std::size_t>(src), 0);
                std::copy(from, from + V, gathered.data() + (c * To + t) * V);
            }
        }
        std::fill(tap.begin(), tap.end(), 0.0f);
        detail::gemm_acc(tk.stacked.data().data() + k * co * ci, gathered.data(), tap.data(), co, ci, To * V);
        float* acc = y.data().data();
        for (std::size_t i = 0; i < tap.size(); ++i) acc[i] += tap[i];
    }
    for (std::size_t o = 0; o < co; ++o) {
        float* p = y.data().data() + o * To * V;
        for (std::size_t i = 0; i < To * V; ++i) p[i] += tk.bias[o];
    }
    return y;
}

enum class WarmupPolicy { strict, zeros };

// Streaming temporal convolution. Each incoming frame is multiplied with all K
// taps at once and its contributions are added into a ring of partial sums for
// the K_eff - 1 future outputs it influences.
class CoConvState {
public:
    CoConvState(std::shared_ptr<const TemporalKernel> kernel, std::size_t num_vertices,
                WarmupPolicy policy = WarmupPolicy::strict)
        : kernel_(std::move(kernel)), V_(num_vertices), policy_(policy) {
        const std::size_t slots = kernel_->extent() - 1;
        ring_.assign(slots * slot_size(), 0.0f);
        if (policy_ == WarmupPolicy::zeros) steps_seen_ = slots;
    }

    // x: [C_in, V]. Returns [C_out, V] when an output is due.
    std::optional<Tensor> step(const Tensor& x) {
        const TemporalKernel& tk = *kernel_;
        if (x.rank() != 2 || x.dim(0) != tk.c_in() || x.dim(1) != V_) {
            throw DimensionError("co_conv_step: frame " + shape_str(x.shape()) + " does not match [" +
                                 std::to_string(tk.c_in()) + "," + std::to_string(V_) + "]");
        }
        const std::size_t K = tk.taps(), n = slot_size(), slots = tk.extent() - 1;
        partial_.assign(K * n, 0.0f);
        detail::gemm_acc(tk.stacked.data().data(), x.data().data(), partial_.data(), K * tk.c_out(),
                         tk.c_in(), V_);

        Tensor y({tk.c_out(), V_});
        float* out = y.data().data();
        const float* newest = partial_.data() + (K - 1) * n;
        if (slots == 0) {
            std::copy(newest, newest + n, out);
        } else {
            float* current = ring_.data() + head_ * n;
            for (std::size_t i = 0; i < n; ++i) out[i] = current[i] + newest[i];
            std::fill(current, current + n, 0.0f);  // recycled as time t + slots
            for (std::size_t k = 0; k + 1 < K; ++k) {
                const std::size_t ahead = (K - 1 - k) * tk.dilation;
                float* slot = ring_.data() + ((head_ + ahead) % slots) * n;
                const float* contrib = partial_.data() + k * n;
                for (std::size_t i = 0; i < n; ++i) slot[i] += contrib[i];
            }
            head_ = (head_ + 1) % slots;
        }

        ++steps_seen_;
        const std::size_t E = tk.extent();
        if (steps_seen_ < E || (steps_seen_ - E) % tk.stride != 0) return std::nullopt;
        for (std::size_t o = 0; o < tk.c_out(); ++o)
            for (std::size_t v = 0; v < V_; ++v) out[o * V_ + v] += tk.bias[o];
        return y;
    }

    // Floats held between steps (the partial-sum ring only).
    std::size_t state_floats() const { return ring_.size(); }
    std::size_t ring_slots() const { return kernel_->extent() - 1; }
    std::size_t steps_seen() const { return steps_seen_; }
    const TemporalKernel& kernel() const { return *kernel_; }

private:
    std::size_t slot_size() const { return kernel_->c_out() * V_; }

    std::shared_ptr<const TemporalKernel> kernel_;
    std::size_t V_;
    WarmupPolicy policy_;
    std::vector<float> ring_;
    std::vector<float> partial_;  // scratch, rewritten every step
    std::size_t head_ = 0;
    std::size_t steps_seen_ = 0;
};

inline CoConvState co_conv_init(Tensor kernel, Tensor bias, std::size_t dilation, std::size_t stride,
                                std::size_t num_vertices, WarmupPolicy policy = WarmupPolicy::strict) {
    return CoConvState(make_temporal_kernel(std::move(kernel), std::move(bias), stride, dilation),
                       num_vertices, policy);
}

// Residual delay k + (k-1)(d-1) - p - 1 for a regular conv with kernel k,
// dilation d and padding p.
inline std::size_t compute_delay(std::int64_t kernel, std::int64_t dilation, std::int64_t padding) {
    const std::int64_t delay = kernel + (kernel - 1) * (dilation - 1) - padding - 1;
    if (kernel < 1 || dilation < 1 || padding < 0) {
        throw ConfigError("compute_delay: kernel and dilation must be >= 1, padding >= 0");
    }
    if (delay < 0) {
        throw ConfigError("compute_delay: padding " + std::to_string(padding) + " exceeds causal extent " +
                          std::to_string(kernel + (kernel - 1) * (dilation - 1) - 1));
    }
    return static_cast<std::size_t>(delay);
}

// FIFO that returns the value pushed `capacity` steps earlier.
class DelayLine {
public:
    explicit DelayLine(std::size_t capacity = 0) : capacity_(capacity) {}

    std::optional<Tensor> step(Tensor x) {
        if (capacity_ == 0) return x;
        queue_.push_back(std::move(x));
        if (queue_.size() <= capacity_) return std::nullopt;
        Tensor out = std::move(queue_.front());
        queue_.pop_front();
        return out;
    }

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return queue_.size(); }
    std::size_t state_floats() const {
        std::size_t n = 0;
        for (const auto& t : queue_) n += t.size();
        return n;
    }

private:
    std::size_t capacity_;
    std::deque<Tensor> queue_;
};

// Sliding-window temporal mean over the last min(seen, window) inputs.
class CoPoolState {
public:
    explicit CoPoolState(std::size_t window) : window_(window) {
        if (window_ == 0) throw ConfigError("pool window must be >= 1");
    }

    Tensor step(const Tensor& x) {
        if (ring_.empty()) {
            ring_.assign(window_, Tensor(x.shape()));
        } else if (x.shape() != ring_.front().shape()) {
            throw DimensionError("co_avgpool_step: shape changed mid-stream");
        }
        ring_[next_] = x;
        next_ = (next_ + 1) % window_;
        if (filled_ < window_) ++filled_;

        // Oldest to newest, in double, so the result does not drift over long streams.
        std::vector<double> sum(x.size(), 0.0);
        const std::size_t oldest = (next_ + window_ - filled_) % window_;
        for (std::size_t i = 0; i < filled_; ++i) {
            const Tensor& t = ring_[(oldest + i) % window_];
            for (std::size_t j = 0; j < t.size(); ++j) sum[j] += t[j];
        }
        Tensor mean(x.shape());
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] = static_cast<float>(sum[j] / filled_);
        return mean;
    }

    std::size_t window() const { return window_; }
    std::size_t state_floats() const { return ring_.empty() ? 0 : ring_.size() * ring_.front().size(); }

private:
    std::size_t window_;
    std::vector<Tensor> ring_;
    std::size_t next_ = 0;
    std::size_t filled_ = 0;
};

// Effective network stride; the prediction rate is its reciprocal.
inline std::size_t network_stride(std::span<const std::size_t> strides) {
    std::size_t s = 1;
    for (std::size_t v : strides) {
        if (v == 0) throw ConfigError("stride must be >= 1");
        s *= v;
    }
    return s;
}

inline std::size_t network_stride(std::initializer_list<std::size_t> strides) {
    return network_stride(std::span<const std::size_t>(strides.begin(), strides.size()));
}

}  // namespace costgcn
