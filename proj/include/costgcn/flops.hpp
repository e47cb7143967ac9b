#pragma once

#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "costgcn/config.hpp"
#include "costgcn/continual.hpp"

// Analytical cost model. Counting rules: one multiply-accumulate is 2 FLOPs,
// batch norm 2 per element, ReLU, bias and residual add 1 per element, softmax
// 5 per element. All figures are for a single body (M = 1). Terms that depend
// only on weights (A_p * M_p, A_p + B_p) are folded at load time and not counted.

namespace costgcn {

struct FlopsReport {
    double clip_flops = 0;           // one prediction from a T-frame clip
    double step_flops_per_pred = 0;  // steady-state continual cost per prediction
    std::uint64_t params = 0;
    std::uint64_t state_bytes = 0;
    std::size_t frames_per_pred = 1;
    double reduction_factor = 0;  // clip_flops / step_flops_per_pred
};

// Multiply-adds of a bias-free convolution producing `out_frames` frames.
inline double mac_flops(std::size_t c_in, std::size_t c_out, std::size_t taps, std::size_t V,
                        std::size_t out_frames) {
    return 2.0 * taps * c_in * c_out * V * static_cast<double>(out_frames);
}

// Regular convolution with bias: C_in -> C_out, K taps, V vertices.
inline double conv_flops(std::size_t c_in, std::size_t c_out, std::size_t taps, std::size_t V,
                         std::size_t out_frames) {
    return mac_flops(c_in, c_out, taps, V, out_frames) + 1.0 * c_out * V * static_cast<double>(out_frames);
}

// Partial-sum ring of one continual conv, in bytes.
inline std::uint64_t conv_state_bytes(std::size_t extent, std::size_t c_out, std::size_t V) {
    return 4ull * (extent - 1) * c_out * V;
}

namespace detail {

// Per-frame cost of a block's spatial op, including its BN, residual and ReLU.
// For AGC the attention map (theta/phi projections excepted) is excluded here
// when `attention_per_frame` is false; the caller adds it once per clip.
inline double spatial_frame_flops(const BlockSpec& b, std::size_t V, bool attention_per_frame) {
    const double ci = b.in, co = b.out, v = V, vv = v * v;
    double f = 0;
    switch (b.spatial) {
        case SpatialKind::gc:
            f += 3 * (2 * ci * co * v + 2 * co * vv);
            break;
        case SpatialKind::agc: {
            const double ce = b.embed_dim;
            f += 3 * (2 * ci * co * v + 2 * co * vv);
            f += 3 * (2 * 2 * ce * ci * v);  // theta h, phi h
            if (attention_per_frame) f += 3 * (2 * ce * vv + 5 * vv + vv);
            break;
        }
        case SpatialKind::ssa: {
            const double S = b.heads, dk = b.key_dim, dv = b.value_dim;
            f += S * (2 * (2 * dk + dv) * ci * v + 2 * dk * vv + vv + 5 * vv + 2 * dv * vv);
            f += 2 * co * S * dv * v;
            break;
        }
    }
    f += 2 * co * v;  // BN
    if (b.spatial_residual == ResidualKind::projection) f += 2 * ci * co * v;
    if (b.spatial_residual != ResidualKind::none) f += co * v;
    f += co * v;  // ReLU
    return f;
}

// Once-per-clip attention cost of a global-scope AGC over T frames.
inline double agc_global_flops(const BlockSpec& b, std::size_t V, std::size_t T) {
    const double vv = double(V) * V;
    return 3 * (2.0 * b.embed_dim * vv * T + 5 * vv + vv);
}

// Per-output-frame tail after the temporal conv: BN, residual, ReLU.
inline double tail_frame_flops(const BlockSpec& b, std::size_t V) {
    const double co = b.out, v = V;
    double f = 2 * co * v + co * v;
    if (b.residual != ResidualKind::none) f += co * v;
    return f;
}

inline double residual_projection_flops(const BlockSpec& b, std::size_t V) {
    return b.residual == ResidualKind::projection ? 2.0 * b.in * b.out * V : 0.0;
}

inline double head_flops(const NetworkConfig& cfg) {
    return 2.0 * cfg.out_channels() * cfg.num_classes + cfg.num_classes;
}

}  // namespace detail

// Clip-mode FLOPs for one T-frame prediction.
inline double count_clip(const NetworkConfig& cfg, std::size_t T) {
    const std::size_t V = cfg.num_joints();
    double f = cfg.input_bn ? 2.0 * cfg.in_channels * V * T : 0.0;
    std::size_t t = T;
    for (const auto& b : cfg.blocks) {
        const bool global = b.spatial == SpatialKind::agc && cfg.attention_scope == AttentionScope::global;
        f += detail::spatial_frame_flops(b, V, !global) * t;
        if (global) f += detail::agc_global_flops(b, V, t);
        const std::size_t to = conv_output_length(t, b.extent(), b.stride, b.padding_frames());
        f += conv_flops(b.out, b.out, b.kernel, V, to);
        f += (detail::tail_frame_flops(b, V) + detail::residual_projection_flops(b, V)) * to;
        t = to;
    }
    f += 1.0 * cfg.out_channels() * V * t;  // global average pool
    return f + detail::head_flops(cfg);
}

// Steady-state FLOPs per prediction of a continual config. Each block runs its
// spatial op, residual projection and all K conv taps once per frame arriving
// at its input; BN, residual add and ReLU run once per emitted frame.
inline double count_step(const NetworkConfig& cfg) {
    if (!cfg.is_continual()) {
        throw ModeError("count_step: config '" + cfg.name + "' is padded; convert it to a continual variant first");
    }
    const std::size_t V = cfg.num_joints();
    const double sNN = static_cast<double>(cfg.network_stride());
    double f = cfg.input_bn ? 2.0 * cfg.in_channels * V * sNN : 0.0;
    double frames = sNN;  // frames arriving at the current block per prediction
    for (const auto& b : cfg.blocks) {
        f += frames * (detail::spatial_frame_flops(b, V, true) + detail::residual_projection_flops(b, V));
        f += frames * 2.0 * b.kernel * b.out * b.out * V;
        frames /= static_cast<double>(b.stride);
        f += frames * (1.0 * b.out * V + detail::tail_frame_flops(b, V));  // bias + tail
    }
    const double C = cfg.out_channels();
    f += C * V + C * static_cast<double>(cfg.effective_pool_window());  // joint mean, window mean
    return f + detail::head_flops(cfg);
}

// Trainable parameters only (BN running statistics excluded).
inline std::uint64_t count_params(const NetworkConfig& cfg) {
    std::uint64_t n = 0;
    for (const auto& [name, spec] : weight_shapes(cfg))
        if (spec.trainable) n += shape_size(spec.shape);
    return n;
}

// Bytes carried between steps by one stream of one body.
inline std::uint64_t count_state(const NetworkConfig& cfg) {
    if (!cfg.is_continual()) throw ModeError("count_state: config '" + cfg.name + "' is padded");
    const std::size_t V = cfg.num_joints();
    std::uint64_t bytes = 0;
    for (const auto& b : cfg.blocks) {
        bytes += conv_state_bytes(b.extent(), b.out, V);
        if (b.residual != ResidualKind::none) bytes += 4ull * b.residual_delay * b.out * V;
    }
    return bytes + 4ull * cfg.effective_pool_window() * cfg.out_channels();
}

// Clip cost from `clip_cfg` at T frames against step cost of `step_cfg`.
inline FlopsReport make_report(const NetworkConfig& clip_cfg, const NetworkConfig& step_cfg, std::size_t T) {
    FlopsReport r;
    r.clip_flops = count_clip(clip_cfg, T);
    r.step_flops_per_pred = count_step(step_cfg);
    r.params = count_params(step_cfg);
    r.state_bytes = count_state(step_cfg);
    r.frames_per_pred = step_cfg.network_stride();
    r.reduction_factor = r.clip_flops / r.step_flops_per_pred;
    return r;
}

inline nlohmann::json to_json(const FlopsReport& r) {
    return {{"clip_flops", r.clip_flops},
            {"step_flops_per_pred", r.step_flops_per_pred},
            {"params", r.params},
            {"state_bytes", r.state_bytes},
            {"frames_per_pred", r.frames_per_pred},
            {"reduction_factor", r.reduction_factor}};
}

inline std::string format_table(const FlopsReport& r) {
    std::ostringstream os;
    os << std::fixed;
    auto row = [&os](const std::string& key, const std::string& value) {
        os << std::left << std::setw(22) << key << std::right << std::setw(16) << value << '\n';
    };
    auto num = [](double v, double scale, const char* unit, int prec) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(prec) << v / scale << unit;
        return s.str();
    };
    row("clip FLOPs", num(r.clip_flops, 1e9, " G", 3));
    row("step FLOPs / pred", num(r.step_flops_per_pred, 1e9, " G", 4));
    row("reduction", num(r.reduction_factor, 1.0, " x", 1));
    row("frames / pred", std::to_string(r.frames_per_pred));
    row("params", num(static_cast<double>(r.params), 1e6, " M", 3));
    row("state", num(static_cast<double>(r.state_bytes), 1024.0, " KiB", 1));
    return os.str();
}

}  // namespace costgcn
