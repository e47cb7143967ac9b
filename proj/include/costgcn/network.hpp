#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "costgcn/blocks.hpp"
#include "costgcn/config.hpp"
#include "costgcn/continual.hpp"
#include "costgcn/graph.hpp"
#include "costgcn/numerics.hpp"
#include "costgcn/weights.hpp"

namespace costgcn {

// Config plus validated, immutable parameters. Shareable across threads and streams.
struct Model {
    NetworkConfig config;
    std::shared_ptr<const AdjacencySet> adjacency;
    std::optional<BatchNorm> input_bn;  // over C0 * V channels
    std::vector<std::shared_ptr<const BlockParams>> blocks;
    Tensor fc_weight;  // [num_classes, C_last]
    Tensor fc_bias;    // [num_classes]
};

namespace detail {

inline const Tensor& take(const WeightStore& store, const std::string& name, const Shape& shape) {
    auto it = store.find(name);
    if (it == store.end()) throw ConfigError("missing weight tensor '" + name + "'");
    if (it->second.shape() != shape) {
        throw ConfigError("weight tensor '" + name + "' has shape " + shape_str(it->second.shape()) + ", expected " +
                          shape_str(shape));
    }
    return it->second;
}

// Slice i of a [n, ...] tensor.
inline Tensor slice0(const Tensor& t, std::size_t i) {
    Shape inner(t.shape().begin() + 1, t.shape().end());
    const std::size_t n = shape_size(inner);
    return Tensor(inner, std::vector<float>(t.data().begin() + i * n, t.data().begin() + (i + 1) * n));
}

inline std::array<Tensor, 3> split3(const Tensor& t) { return {slice0(t, 0), slice0(t, 1), slice0(t, 2)}; }

inline std::vector<Tensor> split_heads(const Tensor& t) {
    std::vector<Tensor> out;
    for (std::size_t i = 0; i < t.dim(0); ++i) out.push_back(slice0(t, i));
    return out;
}

}  // namespace detail

// Checks every tensor the config names and builds the runtime parameters.
inline Model bind_model(const NetworkConfig& config, const WeightStore& store) {
    validate(config);
    const auto shapes = weight_shapes(config);
    for (const auto& [name, spec] : shapes) detail::take(store, name, spec.shape);
    auto get = [&](const std::string& name) -> const Tensor& { return store.at(name); };
    auto bn = [&](const std::string& prefix) {
        return BatchNorm{get(prefix + ".gamma"), get(prefix + ".beta"), get(prefix + ".mean"), get(prefix + ".var")};
    };
    auto residual = [&](ResidualKind kind, const std::string& name) {
        if (kind == ResidualKind::projection) return Residual::projection(get(name));
        return kind == ResidualKind::identity ? Residual::identity() : Residual::none();
    };

    Model m;
    m.config = config;
    m.adjacency = std::make_shared<const AdjacencySet>(make_adjacency(config.graph));
    if (config.input_bn) m.input_bn = bn("input_bn");
    for (std::size_t i = 0; i < config.blocks.size(); ++i) {
        const auto& b = config.blocks[i];
        const std::string p = "blocks." + std::to_string(i) + ".";
        auto params = std::make_shared<BlockParams>();
        const Residual sres = residual(b.spatial_residual, p + "spatial.residual");
        switch (b.spatial) {
            case SpatialKind::gc:
                params->spatial = GcParams{detail::split3(get(p + "spatial.weight")),
                                           detail::split3(get(p + "spatial.edge_importance")), bn(p + "spatial.bn"), sres};
                break;
            case SpatialKind::agc:
                params->spatial = AgcParams{detail::split3(get(p + "spatial.weight")),
                                            detail::split3(get(p + "spatial.learned_adj")),
                                            detail::split3(get(p + "spatial.theta")),
                                            detail::split3(get(p + "spatial.phi")),
                                            bn(p + "spatial.bn"),
                                            sres};
                break;
            case SpatialKind::ssa:
                params->spatial = SsaParams{detail::split_heads(get(p + "spatial.query")),
                                            detail::split_heads(get(p + "spatial.key")),
                                            detail::split_heads(get(p + "spatial.value")),
                                            get(p + "spatial.out_proj"),
                                            bn(p + "spatial.bn"),
                                            sres};
                break;
        }
        params->tcn = make_temporal_kernel(get(p + "tcn.kernel"), get(p + "tcn.bias"), b.stride, b.dilation);
        params->tcn_bn = bn(p + "tcn.bn");
        params->res = residual(b.residual, p + "residual");
        params->padding = b.padding_frames();
        params->residual_delay = b.residual_delay;
        m.blocks.push_back(std::move(params));
    }
    m.fc_weight = get("fc.weight");
    m.fc_bias = get("fc.bias");
    return m;
}

namespace detail {

// Input BN treats each (channel, joint) pair of x [C0, T, V] as its own channel.
inline void input_bn_inplace(Tensor& x, const BatchNorm& bn) {
    const std::size_t C = x.dim(0), T = x.dim(1), V = x.dim(2);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t v = 0; v < V; ++v) {
            const std::size_t ch = c * V + v;
            const float scale = bn.gamma[ch] / std::sqrt(bn.var[ch] + bn.eps);
            const float shift = bn.beta[ch] - scale * bn.mean[ch];
            for (std::size_t t = 0; t < T; ++t) x(c, t, v) = x(c, t, v) * scale + shift;
        }
}

inline Tensor head(const Model& m, const std::vector<double>& pooled) {
    Tensor feat({pooled.size(), 1});
    for (std::size_t i = 0; i < pooled.size(); ++i) feat[i] = static_cast<float>(pooled[i]);
    Tensor logits = matmul(m.fc_weight, feat).reshaped({m.fc_weight.dim(0)});
    add_inplace(logits, m.fc_bias);
    return logits;
}

}  // namespace detail

// Person m of a [C0, T, V, M] clip as [C0, T, V].
inline Tensor person_clip(const Tensor& clip, std::size_t m) {
    const std::size_t C = clip.dim(0), T = clip.dim(1), V = clip.dim(2), M = clip.dim(3);
    Tensor x({C, T, V});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t v = 0; v < V; ++v) x(c, t, v) = clip[((c * T + t) * V + v) * M + m];
    return x;
}

// Block-stack features of one person [C0, T, V] -> [C_last, T', V].
inline Tensor forward_features(const Model& model, Tensor x) {
    if (model.input_bn) detail::input_bn_inplace(x, *model.input_bn);
    for (std::size_t i = 0; i < model.blocks.size(); ++i) {
        auto y = st_block_clip(x, *model.adjacency, *model.blocks[i], model.config.attention_scope);
        if (!y) {
            throw DimensionError("clip of " + std::to_string(x.dim(1)) + " frames is too short at block " +
                                 std::to_string(i) + "; the model needs at least " +
                                 std::to_string(min_clip_length(model.config)) + " input frames");
        }
        x = std::move(*y);
    }
    return x;
}

// clip: [C0, T, V, M] -> logits [num_classes]. Global average over T', V and persons.
inline Tensor forward_clip(const Model& model, const Tensor& clip) {
    const auto& cfg = model.config;
    if (clip.rank() != 4 || clip.dim(0) != cfg.in_channels || clip.dim(2) != cfg.num_joints() || clip.dim(3) == 0) {
        throw DimensionError("forward_clip: clip " + shape_str(clip.shape()) + " does not match [C0=" +
                             std::to_string(cfg.in_channels) + ", T, V=" + std::to_string(cfg.num_joints()) + ", M]");
    }
    const std::size_t M = clip.dim(3);
    if (clip.dim(1) < min_clip_length(cfg)) {
        throw DimensionError("forward_clip: clip has " + std::to_string(clip.dim(1)) + " frames, the model needs at least " +
                             std::to_string(min_clip_length(cfg)));
    }
    std::vector<double> pooled(cfg.out_channels(), 0.0);
    for (std::size_t m = 0; m < M; ++m) {
        const Tensor f = forward_features(model, person_clip(clip, m));
        const std::size_t C = f.dim(0), n = f.dim(1) * f.dim(2);
        for (std::size_t c = 0; c < C; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += f[c * n + i];
            pooled[c] += s / static_cast<double>(n);
        }
    }
    for (double& p : pooled) p /= static_cast<double>(M);
    return detail::head(model, pooled);
}

struct Prediction {
    Tensor logits;
    std::size_t frame_index = 0;  // newest input frame that influenced the prediction
};

// Everything one stream mutates: per-person block states and the pooling window.
class StreamState {
public:
    StreamState(const Model& model, std::size_t persons)
        : pool_(model.config.effective_pool_window()), persons_(persons) {
        if (!model.config.is_continual()) {
            throw ModeError("config '" + model.config.name +
                            "' uses temporal padding; convert it to a continual variant (convert --target co) first");
        }
        if (persons == 0) throw ConfigError("stream: persons must be >= 1");
        blocks_.resize(persons);
        for (auto& per : blocks_)
            for (const auto& b : model.blocks) per.emplace_back(b, model.adjacency);
    }

    std::size_t frames_seen() const { return frames_; }
    std::size_t persons() const { return persons_; }

    // Floats carried between frames (conv rings, residual delay lines, pool window).
    std::size_t state_floats() const {
        std::size_t n = pool_.state_floats();
        for (const auto& per : blocks_)
            for (const auto& b : per) n += b.state_floats();
        return n;
    }

private:
    friend std::optional<std::vector<Tensor>> forward_step_features(const Model&, StreamState&, const Tensor&);
    friend std::optional<Prediction> forward_step(const Model&, StreamState&, const Tensor&);

    std::vector<std::vector<CoBlockState>> blocks_;
    CoPoolState pool_;
    std::size_t persons_;
    std::size_t frames_ = 0;
};

inline StreamState init_stream(const Model& model, std::size_t persons = 1) { return StreamState(model, persons); }

// frame: [C0, V, M]. Returns the last block's [C_last, V] output per person when it emits.
inline std::optional<std::vector<Tensor>> forward_step_features(const Model& model, StreamState& state,
                                                                const Tensor& frame) {
    const auto& cfg = model.config;
    const std::size_t C0 = cfg.in_channels, V = cfg.num_joints(), M = state.persons_;
    if (frame.rank() != 3 || frame.dim(0) != C0 || frame.dim(1) != V || frame.dim(2) != M) {
        throw DimensionError("forward_step: frame " + shape_str(frame.shape()) + " does not match [" + std::to_string(C0) +
                             "," + std::to_string(V) + "," + std::to_string(M) + "]");
    }
    ++state.frames_;
    std::vector<Tensor> out;
    for (std::size_t m = 0; m < M; ++m) {
        Tensor x({C0, 1, V});
        for (std::size_t c = 0; c < C0; ++c)
            for (std::size_t v = 0; v < V; ++v) x(c, 0, v) = frame(c, v, m);
        if (model.input_bn) detail::input_bn_inplace(x, *model.input_bn);
        std::optional<Tensor> y = x.reshaped({C0, V});
        for (auto& block : state.blocks_[m]) {
            y = block.step(*y);
            if (!y) break;
        }
        if (y) out.push_back(std::move(*y));
    }
    if (out.empty()) return std::nullopt;
    if (out.size() != M) throw Error("forward_step: person streams lost synchronisation");
    return out;
}

// frame: [C0, V, M]. Emits when the last block emits; persons are mean-fused before CoGAP.
inline std::optional<Prediction> forward_step(const Model& model, StreamState& state, const Tensor& frame) {
    auto features = forward_step_features(model, state, frame);
    if (!features) return std::nullopt;
    const std::size_t C = model.config.out_channels(), V = model.config.num_joints();
    std::vector<double> pooled(C, 0.0);
    for (const Tensor& y : *features)
        for (std::size_t c = 0; c < C; ++c) {
            double s = 0.0;
            for (std::size_t v = 0; v < V; ++v) s += y(c, v);
            pooled[c] += s / static_cast<double>(V);
        }
    Tensor fused({C});
    for (std::size_t c = 0; c < C; ++c) fused[c] = static_cast<float>(pooled[c] / static_cast<double>(features->size()));
    const Tensor windowed = state.pool_.step(fused);
    std::vector<double> feat(windowed.data().begin(), windowed.data().end());
    return Prediction{detail::head(model, feat), state.frames_ - 1};
}

}  // namespace costgcn
