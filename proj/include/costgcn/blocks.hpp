#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "costgcn/continual.hpp"
#include "costgcn/graph.hpp"
#include "costgcn/numerics.hpp"
#include "costgcn/tensor.hpp"

namespace costgcn {

// Layout conventions: a frame is [C, V]; a clip of features is [C, T, V].

enum class ResidualKind { none, identity, projection };

struct Residual {
    ResidualKind kind = ResidualKind::none;
    Tensor weight;  // [C_out, C_in] when kind == projection

    static Residual none() { return {}; }
    static Residual identity() { return {ResidualKind::identity, {}}; }
    static Residual projection(Tensor w) { return {ResidualKind::projection, std::move(w)}; }

    bool active() const { return kind != ResidualKind::none; }

    // x: [C_in, ...] -> [C_out, ...]
    Tensor apply(const Tensor& x) const {
        if (kind == ResidualKind::identity) return x;
        if (kind != ResidualKind::projection) throw ConfigError("residual: apply on an inactive residual");
        if (weight.rank() != 2 || x.rank() == 0 || x.dim(0) != weight.dim(1)) {
            throw DimensionError("residual: projection " + shape_str(weight.shape()) + " cannot take " +
                                 shape_str(x.shape()));
        }
        Shape out_shape = x.shape();
        out_shape[0] = weight.dim(0);
        Tensor y(out_shape);
        const std::size_t rest = x.size() / x.dim(0);
        detail::gemm_acc(weight.data().data(), x.data().data(), y.data().data(), weight.dim(0), weight.dim(1),
                         rest);
        return y;
    }
};

// Graph convolution with learnable edge importance M_p (elementwise on A_p).
struct GcParams {
    std::array<Tensor, 3> weight;           // [C_out, C_in]
    std::array<Tensor, 3> edge_importance;  // [V, V]
    BatchNorm bn;
    Residual res;
};

// Adaptive graph convolution: A_p + B_p + C_p with C_p computed from features.
struct AgcParams {
    std::array<Tensor, 3> weight;        // [C_out, C_in]
    std::array<Tensor, 3> learned_adj;   // B_p [V, V]
    std::array<Tensor, 3> theta, phi;    // [C_e, C_in]
    BatchNorm bn;
    Residual res;
};

// Multi-head spatial self-attention over the joints of one frame.
struct SsaParams {
    std::vector<Tensor> query, key, value;  // per head [dk, C_in], [dk, C_in], [dv, C_in]
    Tensor out_proj;                        // [C_out, S * dv]
    BatchNorm bn;
    Residual res;
};

using SpatialParams = std::variant<GcParams, AgcParams, SsaParams>;

// AGC attention is computed per frame (causal) or once over the whole clip.
enum class AttentionScope { global, frame };

namespace detail {

inline Tensor as_clip(const Tensor& x) {
    if (x.rank() == 2) return x.reshaped({x.dim(0), 1, x.dim(1)});
    if (x.rank() != 3) throw DimensionError("spatial op: expected [C,V] or [C,T,V], got " + shape_str(x.shape()));
    return x;
}

// Copy frame t of a [C, T, V] tensor.
inline Tensor frame_at(const Tensor& x, std::size_t t) {
    const std::size_t C = x.dim(0), T = x.dim(1), V = x.dim(2);
    Tensor f({C, V});
    for (std::size_t c = 0; c < C; ++c) {
        const float* src = x.data().data() + (c * T + t) * V;
        std::copy(src, src + V, f.data().data() + c * V);
    }
    return f;
}

inline void set_frame(Tensor& x, std::size_t t, const Tensor& f) {
    const std::size_t C = x.dim(0), T = x.dim(1), V = x.dim(2);
    for (std::size_t c = 0; c < C; ++c) {
        const float* src = f.data().data() + c * V;
        std::copy(src, src + V, x.data().data() + (c * T + t) * V);
    }
}

// W [C_out, C_in] applied to every (t, v) column of x [C_in, T, V].
inline Tensor channel_mix(const Tensor& w, const Tensor& x) {
    if (w.rank() != 2 || w.dim(1) != x.dim(0)) {
        throw DimensionError("channel mix: " + shape_str(w.shape()) + " vs input " + shape_str(x.shape()));
    }
    Tensor y({w.dim(0), x.dim(1), x.dim(2)});
    gemm_acc(w.data().data(), x.data().data(), y.data().data(), w.dim(0), w.dim(1), x.dim(1) * x.dim(2));
    return y;
}

// acc [C, T, V] += y [C, T, V] * A [V, V] on the vertex axis.
inline void aggregate_acc(Tensor& acc, const Tensor& y, const Tensor& A) {
    const std::size_t V = y.dim(2);
    if (A.rank() != 2 || A.dim(0) != V || A.dim(1) != V) {
        throw DimensionError("aggregate: adjacency " + shape_str(A.shape()) + " for V=" + std::to_string(V));
    }
    gemm_acc(y.data().data(), A.data().data(), acc.data().data(), y.dim(0) * y.dim(1), V, V);
}

// acc [C, V] += y [C, V] * A [V, V]
inline void aggregate_frame_acc(float* acc, const float* y, const Tensor& A, std::size_t C, std::size_t V) {
    gemm_acc(y, A.data().data(), acc, C, V, V);
}

inline Tensor finish_spatial(Tensor agg, const Tensor& x, const BatchNorm& bn, const Residual& res) {
    batchnorm_inplace(agg, bn);
    if (res.active()) add_inplace(agg, res.apply(x));
    relu_inplace(agg);
    return agg;
}

inline Tensor restore_rank(Tensor y, std::size_t rank) {
    if (rank == 2) return y.reshaped({y.dim(0), y.dim(2)});
    return y;
}

}  // namespace detail

// relu(Res(h) + BN(sum_p (W_p h)(A_p * M_p))). h: [C_in, V] or [C_in, T, V].
inline Tensor gc_forward(const Tensor& h, const AdjacencySet& adj, const GcParams& p) {
    const Tensor x = detail::as_clip(h);
    Tensor agg;
    for (std::size_t s = 0; s < 3; ++s) {
        const Tensor y = detail::channel_mix(p.weight[s], x);
        if (s == 0) agg = Tensor(y.shape());
        expect_shape(p.edge_importance[s], adj.A[s].shape(), "gc edge importance");
        Tensor eff = adj.A[s];
        for (std::size_t i = 0; i < eff.size(); ++i) eff[i] *= p.edge_importance[s][i];
        detail::aggregate_acc(agg, y, eff);
    }
    return detail::restore_rank(detail::finish_spatial(std::move(agg), x, p.bn, p.res), h.rank());
}

// C_p = softmax_rows((theta h)^T (phi h)) for one frame h [C_in, V]; subset in 0..2.
inline Tensor agc_attention(const Tensor& h, const AgcParams& p, std::size_t subset) {
    if (h.rank() != 2) throw DimensionError("agc_attention: expected a frame [C,V], got " + shape_str(h.shape()));
    const Tensor a = matmul(p.theta.at(subset), h);
    const Tensor b = matmul(p.phi.at(subset), h);
    return softmax_rows(matmul(transpose(a), b));
}

namespace detail {

// Unnormalised logits summed over every frame of x [C_in, T, V].
inline Tensor agc_global_logits(const Tensor& x, const AgcParams& p, std::size_t subset) {
    const std::size_t T = x.dim(1), V = x.dim(2);
    const Tensor a = channel_mix(p.theta[subset], x);  // [C_e, T, V]
    const Tensor b = channel_mix(p.phi[subset], x);
    const std::size_t Ce = a.dim(0);
    Tensor logits({V, V});
    for (std::size_t i = 0; i < V; ++i)
        for (std::size_t j = 0; j < V; ++j) {
            float s = 0.0f;
            for (std::size_t c = 0; c < Ce; ++c)
                for (std::size_t t = 0; t < T; ++t) s += a(c, t, i) * b(c, t, j);
            logits(i, j) = s;
        }
    return logits;
}

}  // namespace detail

// relu(Res(h) + BN(sum_p (W_p h)(A_p + B_p + C_p))). With a clip input and
// global scope one C_p is shared by all frames; otherwise each frame gets its own.
inline Tensor agc_forward(const Tensor& h, const AdjacencySet& adj, const AgcParams& p,
                          AttentionScope scope = AttentionScope::frame) {
    const Tensor x = detail::as_clip(h);
    const std::size_t T = x.dim(1), V = x.dim(2);
    Tensor agg;
    for (std::size_t s = 0; s < 3; ++s) {
        const Tensor y = detail::channel_mix(p.weight[s], x);
        if (s == 0) agg = Tensor(y.shape());
        expect_shape(p.learned_adj[s], adj.A[s].shape(), "agc learned adjacency");
        Tensor base = adj.A[s];
        add_inplace(base, p.learned_adj[s]);
        if (scope == AttentionScope::global) {
            Tensor A = softmax_rows(detail::agc_global_logits(x, p, s));
            add_inplace(A, base);
            detail::aggregate_acc(agg, y, A);
            continue;
        }
        const std::size_t Co = y.dim(0);
        std::vector<float> ycol(Co * V), acol(Co * V);
        for (std::size_t t = 0; t < T; ++t) {
            Tensor A = agc_attention(detail::frame_at(x, t), p, s);
            add_inplace(A, base);
            for (std::size_t c = 0; c < Co; ++c) {
                std::copy_n(&y(c, t, 0), V, ycol.data() + c * V);
                std::copy_n(&agg(c, t, 0), V, acol.data() + c * V);
            }
            detail::aggregate_frame_acc(acol.data(), ycol.data(), A, Co, V);
            for (std::size_t c = 0; c < Co; ++c) std::copy_n(acol.data() + c * V, V, &agg(c, t, 0));
        }
    }
    return detail::restore_rank(detail::finish_spatial(std::move(agg), x, p.bn, p.res), h.rank());
}

namespace detail {

// Concatenated head outputs [S*dv, V] for one frame.
inline Tensor ssa_heads(const Tensor& h, const SsaParams& p) {
    const std::size_t S = p.query.size(), V = h.dim(1);
    if (S == 0 || p.key.size() != S || p.value.size() != S) throw ConfigError("ssa: head count mismatch");
    std::size_t total_dv = 0;
    for (const auto& v : p.value) total_dv += v.dim(0);
    Tensor cat({total_dv, V});
    std::size_t row = 0;
    for (std::size_t s = 0; s < S; ++s) {
        if (p.query[s].dim(0) != p.key[s].dim(0)) throw ConfigError("ssa: query and key dims differ");
        const Tensor q = matmul(p.query[s], h);  // [dk, V]
        const Tensor k = matmul(p.key[s], h);
        const Tensor v = matmul(p.value[s], h);  // [dv, V]
        Tensor logits = matmul(transpose(q), k);  // [V, V], (i, j) = q_i . k_j
        const float scale = 1.0f / std::sqrt(static_cast<float>(q.dim(0)));
        for (float& a : logits.data()) a *= scale;
        const Tensor attn = softmax_rows(std::move(logits));
        // out[:, i] = sum_j attn(i, j) v[:, j]
        const Tensor out = matmul(v, transpose(attn));
        std::copy(out.data().begin(), out.data().end(), cat.data().begin() + row * V);
        row += v.dim(0);
    }
    return cat;
}

}  // namespace detail

// relu(Res(h) + BN(W_o [head_1 || ... || head_S])). h: [C_in, V] or [C_in, T, V].
inline Tensor ssa_forward(const Tensor& h, const SsaParams& p) {
    const Tensor x = detail::as_clip(h);
    const std::size_t T = x.dim(1), V = x.dim(2);
    Tensor agg({p.out_proj.dim(0), T, V});
    for (std::size_t t = 0; t < T; ++t) {
        const Tensor heads = detail::ssa_heads(detail::frame_at(x, t), p);
        detail::set_frame(agg, t, matmul(p.out_proj, heads));
    }
    return detail::restore_rank(detail::finish_spatial(std::move(agg), x, p.bn, p.res), h.rank());
}

inline Tensor spatial_forward(const Tensor& h, const AdjacencySet& adj, const SpatialParams& sp,
                              AttentionScope scope = AttentionScope::frame) {
    return std::visit(
        [&](const auto& p) -> Tensor {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, GcParams>)
                return gc_forward(h, adj, p);
            else if constexpr (std::is_same_v<P, AgcParams>)
                return agc_forward(h, adj, p, scope);
            else
                return ssa_forward(h, p);
        },
        sp);
}

// One spatio-temporal block: relu(Res(H) + BN(TC(spatial(H)))).
struct BlockParams {
    SpatialParams spatial;
    std::shared_ptr<const TemporalKernel> tcn;
    BatchNorm tcn_bn;
    Residual res;
    std::size_t padding = 0;         // temporal zero padding in clip mode
    std::size_t residual_delay = 0;  // frames the residual lags the newest input

    std::size_t extent() const { return tcn->extent(); }
    std::size_t stride() const { return tcn->stride; }
};

// Offset of the residual frame inside the (padded) receptive window.
inline std::size_t residual_offset(const BlockParams& p) {
    if (p.residual_delay + 1 > p.extent()) {
        throw ConfigError("block: residual delay " + std::to_string(p.residual_delay) +
                          " exceeds the receptive extent " + std::to_string(p.extent()));
    }
    return p.extent() - 1 - p.residual_delay;
}

// H: [C_in, T, V]. Returns nullopt when T is too short for the kernel.
// Output t' reads its residual from input frame t'*s - padding + residual_offset.
inline std::optional<Tensor> st_block_clip(const Tensor& H, const AdjacencySet& adj, const BlockParams& p,
                                           AttentionScope scope = AttentionScope::frame) {
    if (H.rank() != 3) throw DimensionError("st_block_clip: expected [C,T,V], got " + shape_str(H.shape()));
    const Tensor G = spatial_forward(H, adj, p.spatial, scope);
    auto Y = temporal_conv_clip(G, *p.tcn, p.padding);
    if (!Y) return std::nullopt;
    batchnorm_inplace(*Y, p.tcn_bn);
    if (p.res.active()) {
        const std::size_t To = Y->dim(1), T = H.dim(1);
        const std::size_t offset = residual_offset(p);
        Tensor picked({H.dim(0), To, H.dim(2)});
        for (std::size_t t = 0; t < To; ++t) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * p.stride() + offset) -
                                       static_cast<std::ptrdiff_t>(p.padding);
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) {
                throw ConfigError("st_block_clip: residual frame " + std::to_string(src) +
                                  " outside the input; padding and residual delay disagree");
            }
            detail::set_frame(picked, t, detail::frame_at(H, static_cast<std::size_t>(src)));
        }
        add_inplace(*Y, p.res.apply(picked));
    }
    relu_inplace(*Y);
    return Y;
}

// Continual form of a block: relu(Delay(Res(x_t)) + BN(CoTC(spatial(x_t)))).
class CoBlockState {
public:
    CoBlockState(std::shared_ptr<const BlockParams> params, std::shared_ptr<const AdjacencySet> adj)
        : params_(std::move(params)),
          adj_(std::move(adj)),
          conv_(params_->tcn, adj_->num_joints(), WarmupPolicy::strict),
          delay_(params_->residual_delay) {
        residual_offset(*params_);  // validates the delay against the kernel extent
    }

    // x_t: [C_in, V]. Returns [C_out, V] when the block emits.
    std::optional<Tensor> step(const Tensor& x_t) {
        const BlockParams& p = *params_;
        if (x_t.rank() != 2) throw DimensionError("co_st_block_step: expected [C,V], got " + shape_str(x_t.shape()));
        std::optional<Tensor> residual;
        if (p.res.active()) residual = delay_.step(p.res.apply(x_t));
        auto y = conv_.step(spatial_forward(x_t, *adj_, p.spatial, AttentionScope::frame));
        if (!y) return std::nullopt;
        batchnorm_inplace(*y, p.tcn_bn);
        if (p.res.active()) {
            if (!residual) throw ConfigError("co_st_block_step: residual not yet available at emission");
            add_inplace(*y, *residual);
        }
        relu_inplace(*y);
        return y;
    }

    std::size_t state_floats() const { return conv_.state_floats() + delay_.state_floats(); }
    const BlockParams& params() const { return *params_; }

private:
    std::shared_ptr<const BlockParams> params_;
    std::shared_ptr<const AdjacencySet> adj_;
    CoConvState conv_;
    DelayLine delay_;
};

}  // namespace costgcn
