#pragma once

#include <algorithm>
#include <cstddef>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "costgcn/blocks.hpp"
#include "costgcn/continual.hpp"
#include "costgcn/graph.hpp"
#include "costgcn/tensor.hpp"

namespace costgcn {

// Raised when a regular (padded) model is used where a continual one is required.
struct ModeError : ConfigError {
    using ConfigError::ConfigError;
};

enum class SpatialKind { gc, agc, ssa };
enum class PaddingMode { equal, zero };

struct BlockSpec {
    SpatialKind spatial = SpatialKind::gc;
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t stride = 1;
    std::size_t kernel = 9;
    std::size_t dilation = 1;
    PaddingMode padding = PaddingMode::equal;
    ResidualKind residual = ResidualKind::none;          // block-level skip
    ResidualKind spatial_residual = ResidualKind::none;  // skip inside the spatial op
    std::size_t residual_delay = 0;
    std::size_t embed_dim = 0;  // agc
    std::size_t heads = 0;      // ssa
    std::size_t key_dim = 0;    // ssa, per head
    std::size_t value_dim = 0;  // ssa, per head

    std::size_t extent() const { return (kernel - 1) * dilation + 1; }
    std::size_t padding_frames() const { return padding == PaddingMode::equal ? (extent() - 1) / 2 : 0; }
};

struct NetworkConfig {
    std::string name = "custom";
    SkeletonGraph graph;
    std::size_t num_classes = 0;
    std::size_t t_ref = 300;
    std::size_t in_channels = 3;
    std::size_t persons = 1;
    bool input_bn = false;
    AttentionScope attention_scope = AttentionScope::frame;
    std::vector<BlockSpec> blocks;
    std::size_t pool_window = 0;  // 0: ceil(t_ref / network stride)

    std::size_t num_joints() const { return graph.num_joints; }
    std::size_t out_channels() const { return blocks.empty() ? in_channels : blocks.back().out; }

    std::vector<std::size_t> strides() const {
        std::vector<std::size_t> s;
        for (const auto& b : blocks) s.push_back(b.stride);
        return s;
    }
    std::size_t network_stride() const { return costgcn::network_stride(strides()); }

    std::size_t effective_pool_window() const {
        if (pool_window) return pool_window;
        const std::size_t s = network_stride();
        return std::max<std::size_t>(1, (t_ref + s - 1) / s);
    }

    // Continual (step) inference requires every temporal conv to be unpadded.
    bool is_continual() const {
        for (const auto& b : blocks)
            if (b.padding != PaddingMode::zero) return false;
        return true;
    }
};

inline const char* to_string(SpatialKind k) {
    switch (k) {
        case SpatialKind::gc: return "gc";
        case SpatialKind::agc: return "agc";
        case SpatialKind::ssa: return "ssa";
    }
    return "?";
}

inline const char* to_string(ResidualKind k) {
    switch (k) {
        case ResidualKind::none: return "none";
        case ResidualKind::identity: return "identity";
        case ResidualKind::projection: return "projection";
    }
    return "?";
}

inline void validate(const NetworkConfig& cfg) {
    validate(cfg.graph);
    if (cfg.num_classes == 0) throw ConfigError("config: num_classes must be positive");
    if (cfg.in_channels == 0) throw ConfigError("config: in_channels must be positive");
    if (cfg.persons == 0) throw ConfigError("config: persons must be positive");
    if (!is_connected(cfg.graph)) {
        std::clog << "warning: skeleton graph '" << cfg.graph.name << "' is not connected\n";
    }
    std::size_t channels = cfg.in_channels;
    for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
        const auto& b = cfg.blocks[i];
        const std::string where = "config: block " + std::to_string(i) + ": ";
        if (b.in != channels) {
            throw ConfigError(where + "input width " + std::to_string(b.in) + " does not chain with " +
                              std::to_string(channels));
        }
        if (b.out == 0 || b.kernel == 0 || b.stride == 0 || b.dilation == 0) {
            throw ConfigError(where + "out, kernel, stride and dilation must be positive");
        }
        if (b.padding == PaddingMode::equal && (b.extent() - 1) % 2 != 0) {
            throw ConfigError(where + "equal padding needs an odd receptive extent");
        }
        if (b.residual_delay + 1 > b.extent()) {
            throw ConfigError(where + "residual delay " + std::to_string(b.residual_delay) +
                              " exceeds kernel extent " + std::to_string(b.extent()));
        }
        if (b.padding == PaddingMode::equal && b.residual_delay != compute_delay(b.kernel, b.dilation, b.padding_frames())) {
            throw ConfigError(where + "residual delay of a padded block must equal the padding offset");
        }
        for (auto [kind, label] : {std::pair{b.residual, "residual"}, std::pair{b.spatial_residual, "spatial residual"}}) {
            if (kind == ResidualKind::identity && b.in != b.out) {
                throw ConfigError(where + label + " is identity but widths differ; use projection");
            }
        }
        if (b.spatial == SpatialKind::agc && b.embed_dim == 0) throw ConfigError(where + "agc needs embed_dim > 0");
        if (b.spatial == SpatialKind::ssa && (b.heads == 0 || b.key_dim == 0 || b.value_dim == 0)) {
            throw ConfigError(where + "ssa needs heads, key_dim and value_dim > 0");
        }
        channels = b.out;
    }
}

// 0-based input frame index of the first emission of an unpadded stack, i.e.
// sum over blocks of (extent - 1) times the stride accumulated before the block.
inline std::size_t total_delay(const NetworkConfig& cfg) {
    std::size_t delay = 0, cumulative = 1;
    for (const auto& b : cfg.blocks) {
        if (b.padding != PaddingMode::zero) throw ModeError("total_delay: config '" + cfg.name + "' is padded");
        delay += (b.extent() - 1) * cumulative;
        cumulative *= b.stride;
    }
    return delay;
}

// Shortest clip for which every block produces at least one frame.
inline std::size_t min_clip_length(const NetworkConfig& cfg) {
    std::size_t need = 1;
    for (auto it = cfg.blocks.rbegin(); it != cfg.blocks.rend(); ++it) {
        std::size_t in = (need - 1) * it->stride + it->extent();
        const std::size_t pad = 2 * it->padding_frames();
        need = in > pad ? in - pad : 1;
    }
    return need;
}

enum class PresetKind { stgcn, agcn, str };
enum class Variant { reg, co, co_star };
enum class Scale { full, small, tiny };
enum class ConvertTarget { co, co_star };

struct ConversionReport {
    std::vector<std::size_t> delays;  // per block
    std::size_t total_delay = 0;
    std::size_t network_stride = 1;
    std::vector<std::string> warnings;
};

// Drops temporal padding (delaying the residual to stay aligned) and, for
// co_star, all temporal strides. Weights are carried over unchanged.
inline std::pair<NetworkConfig, ConversionReport> convert(NetworkConfig cfg, ConvertTarget target) {
    ConversionReport report;
    bool strides_changed = false;
    bool had_global_agc = false;
    for (auto& b : cfg.blocks) {
        if (b.padding == PaddingMode::equal) {
            b.residual_delay = compute_delay(b.kernel, b.dilation, b.padding_frames());
            b.padding = PaddingMode::zero;
        }
        if (target == ConvertTarget::co_star && b.stride != 1) {
            b.stride = 1;
            strides_changed = true;
        }
        if (b.spatial == SpatialKind::agc && cfg.attention_scope == AttentionScope::global) had_global_agc = true;
        report.delays.push_back(b.residual_delay);
    }
    cfg.attention_scope = AttentionScope::frame;
    if (had_global_agc) {
        report.warnings.push_back("adaptive attention restricted to per-frame scope (clip-global attention is acausal)");
    }
    if (strides_changed) {
        report.warnings.push_back("temporal strides reduced to 1: the model shifts and needs fine-tuning to recover accuracy");
    }
    const auto suffix = target == ConvertTarget::co ? std::string("-co") : std::string("-co_star");
    auto pos = cfg.name.find("-reg");
    if (pos != std::string::npos) cfg.name = cfg.name.substr(0, pos) + suffix;
    report.total_delay = total_delay(cfg);
    report.network_stride = cfg.network_stride();
    return {std::move(cfg), std::move(report)};
}

inline const char* to_string(PresetKind k) {
    switch (k) {
        case PresetKind::stgcn: return "stgcn";
        case PresetKind::agcn: return "agcn";
        case PresetKind::str: return "str";
    }
    return "?";
}

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::reg: return "reg";
        case Variant::co: return "co";
        case Variant::co_star: return "co_star";
    }
    return "?";
}

// Ten blocks, K=9, widths 64x4 -> 128x3 -> 256x3 with stride 2 at blocks 5 and 8
// (full scale). `small` keeps the layout at a quarter of the width; `tiny` is a
// 3-block network on a 5-joint skeleton for equivalence tests.
inline NetworkConfig preset(PresetKind kind, Variant variant, Scale scale = Scale::full) {
    struct Layer {
        std::size_t in, out, stride;
    };
    std::vector<Layer> plan;
    NetworkConfig cfg;
    std::size_t kernel = 9;
    std::size_t first_ssa = 3;
    if (scale == Scale::tiny) {
        cfg.graph = custom_skeleton(5, {{0, 1}, {1, 2}, {1, 3}, {3, 4}}, 1);
        cfg.graph.name = "tiny5";
        cfg.num_classes = 4;
        cfg.t_ref = 32;
        cfg.persons = 2;
        plan = {{3, 8, 1}, {8, 16, 2}, {16, 16, 1}};
        kernel = 5;
        first_ssa = 1;
    } else {
        cfg.graph = build_skeleton(SkeletonPreset::ntu25);
        cfg.num_classes = 60;
        cfg.t_ref = scale == Scale::full ? 300 : 200;
        cfg.persons = 2;
        const std::size_t w = scale == Scale::full ? 64 : 16;
        plan = {{3, w, 1},         {w, w, 1},         {w, w, 1},         {w, w, 1},
                {w, 2 * w, 2},     {2 * w, 2 * w, 1}, {2 * w, 2 * w, 1}, {2 * w, 4 * w, 2},
                {4 * w, 4 * w, 1}, {4 * w, 4 * w, 1}};
    }
    cfg.name = std::string(to_string(kind)) + (scale == Scale::full ? "" : scale == Scale::small ? "-small" : "-tiny") + "-reg";
    cfg.in_channels = 3;
    cfg.input_bn = true;
    cfg.attention_scope = AttentionScope::global;

    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto& l = plan[i];
        BlockSpec b;
        b.in = l.in;
        b.out = l.out;
        b.stride = l.stride;
        b.kernel = kernel;
        b.padding = PaddingMode::equal;
        b.residual_delay = compute_delay(b.kernel, b.dilation, b.padding_frames());
        const ResidualKind match = l.in == l.out ? ResidualKind::identity : ResidualKind::projection;
        b.residual = i == 0 ? ResidualKind::none
                            : (l.in == l.out && l.stride == 1 ? ResidualKind::identity : ResidualKind::projection);
        switch (kind) {
            case PresetKind::stgcn:
                b.spatial = SpatialKind::gc;
                break;
            case PresetKind::agcn:
                b.spatial = SpatialKind::agc;
                b.spatial_residual = match;
                b.embed_dim = std::max<std::size_t>(1, l.out / 4);
                break;
            case PresetKind::str:
                if (i < first_ssa) {
                    b.spatial = SpatialKind::gc;
                } else {
                    b.spatial = SpatialKind::ssa;
                    b.spatial_residual = match;
                    b.heads = scale == Scale::full ? 8 : 2;
                    b.key_dim = b.value_dim = std::max<std::size_t>(1, l.out / (4 * b.heads));
                }
                break;
        }
        cfg.blocks.push_back(b);
    }
    validate(cfg);
    if (variant == Variant::reg) return cfg;
    return convert(std::move(cfg), variant == Variant::co ? ConvertTarget::co : ConvertTarget::co_star).first;
}

// ---- JSON ----

namespace detail {

template <class E>
E enum_from(const std::string& s, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
    for (auto [name, value] : table)
        if (s == name) return value;
    throw ConfigError(std::string("config: unknown ") + what + " '" + s + "'");
}

inline ResidualKind residual_from(const std::string& s) {
    return enum_from<ResidualKind>(
        s, {{"none", ResidualKind::none}, {"identity", ResidualKind::identity}, {"projection", ResidualKind::projection}},
        "residual kind");
}

}  // namespace detail

inline PresetKind preset_kind_from(const std::string& s) {
    return detail::enum_from<PresetKind>(s, {{"stgcn", PresetKind::stgcn}, {"agcn", PresetKind::agcn}, {"str", PresetKind::str}},
                                         "preset");
}

inline Variant variant_from(const std::string& s) {
    return detail::enum_from<Variant>(s, {{"reg", Variant::reg}, {"co", Variant::co}, {"co_star", Variant::co_star}},
                                      "variant");
}

inline Scale scale_from(const std::string& s) {
    return detail::enum_from<Scale>(s, {{"full", Scale::full}, {"small", Scale::small}, {"tiny", Scale::tiny}}, "scale");
}

inline nlohmann::json to_json(const NetworkConfig& cfg) {
    using nlohmann::json;
    json blocks = json::array();
    for (const auto& b : cfg.blocks) {
        json jb{{"spatial", to_string(b.spatial)},
                {"in", b.in},
                {"out", b.out},
                {"stride", b.stride},
                {"kernel", b.kernel},
                {"dilation", b.dilation},
                {"padding", b.padding == PaddingMode::equal ? "equal" : "zero"},
                {"residual", to_string(b.residual)},
                {"spatial_residual", to_string(b.spatial_residual)},
                {"residual_delay", b.residual_delay}};
        if (b.spatial == SpatialKind::agc) jb["embed_dim"] = b.embed_dim;
        if (b.spatial == SpatialKind::ssa) {
            jb["heads"] = b.heads;
            jb["key_dim"] = b.key_dim;
            jb["value_dim"] = b.value_dim;
        }
        blocks.push_back(std::move(jb));
    }
    json graph;
    if (cfg.graph.name == "ntu25" || cfg.graph.name == "openpose18")
        graph = cfg.graph.name;
    else
        graph = skeleton_to_json(cfg.graph);
    return {{"name", cfg.name},
            {"graph", graph},
            {"num_classes", cfg.num_classes},
            {"t_ref", cfg.t_ref},
            {"in_channels", cfg.in_channels},
            {"persons", cfg.persons},
            {"input_bn", cfg.input_bn},
            {"attention_scope", cfg.attention_scope == AttentionScope::global ? "global" : "frame"},
            {"blocks", blocks},
            {"head", {{"pool_window", cfg.pool_window}}}};
}

inline NetworkConfig config_from_json(const nlohmann::json& j) {
    NetworkConfig cfg;
    try {
        cfg.name = j.value("name", std::string("custom"));
        const auto& g = j.at("graph");
        if (g.is_string()) {
            cfg.graph = build_skeleton(detail::enum_from<SkeletonPreset>(
                g.get<std::string>(), {{"ntu25", SkeletonPreset::ntu25}, {"openpose18", SkeletonPreset::openpose18}},
                "graph preset"));
        } else {
            cfg.graph = skeleton_from_json(g);
        }
        cfg.num_classes = j.at("num_classes").get<std::size_t>();
        cfg.t_ref = j.value("t_ref", std::size_t{300});
        cfg.in_channels = j.value("in_channels", std::size_t{3});
        cfg.persons = j.value("persons", std::size_t{1});
        cfg.input_bn = j.value("input_bn", false);
        cfg.attention_scope = detail::enum_from<AttentionScope>(
            j.value("attention_scope", std::string("frame")),
            {{"global", AttentionScope::global}, {"frame", AttentionScope::frame}}, "attention scope");
        for (const auto& jb : j.at("blocks")) {
            BlockSpec b;
            b.spatial = detail::enum_from<SpatialKind>(jb.value("spatial", std::string("gc")),
                                                       {{"gc", SpatialKind::gc}, {"agc", SpatialKind::agc}, {"ssa", SpatialKind::ssa}},
                                                       "spatial kind");
            b.in = jb.at("in").get<std::size_t>();
            b.out = jb.at("out").get<std::size_t>();
            b.stride = jb.value("stride", std::size_t{1});
            b.kernel = jb.value("kernel", std::size_t{9});
            b.dilation = jb.value("dilation", std::size_t{1});
            b.padding = detail::enum_from<PaddingMode>(jb.value("padding", std::string("equal")),
                                                       {{"equal", PaddingMode::equal}, {"zero", PaddingMode::zero}}, "padding");
            b.residual = detail::residual_from(jb.value("residual", std::string("none")));
            b.spatial_residual = detail::residual_from(jb.value("spatial_residual", std::string("none")));
            b.residual_delay = jb.contains("residual_delay")
                                   ? jb.at("residual_delay").get<std::size_t>()
                                   : compute_delay(b.kernel, b.dilation, b.padding_frames());
            b.embed_dim = jb.value("embed_dim", std::size_t{0});
            b.heads = jb.value("heads", std::size_t{0});
            b.key_dim = jb.value("key_dim", std::size_t{0});
            b.value_dim = jb.value("value_dim", std::size_t{0});
            cfg.blocks.push_back(b);
        }
        if (j.contains("head")) cfg.pool_window = j.at("head").value("pool_window", std::size_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config json: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

// ---- weight naming ----

struct WeightSpec {
    Shape shape;
    bool trainable = true;  // BN running statistics are not
};

// Every tensor a config consumes, by dotted name.
inline std::map<std::string, WeightSpec> weight_shapes(const NetworkConfig& cfg) {
    std::map<std::string, WeightSpec> w;
    const std::size_t V = cfg.num_joints();
    auto bn = [&w](const std::string& prefix, std::size_t c) {
        w[prefix + ".gamma"] = {{c}, true};
        w[prefix + ".beta"] = {{c}, true};
        w[prefix + ".mean"] = {{c}, false};
        w[prefix + ".var"] = {{c}, false};
    };
    if (cfg.input_bn) bn("input_bn", cfg.in_channels * V);
    for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
        const auto& b = cfg.blocks[i];
        const std::string p = "blocks." + std::to_string(i) + ".";
        switch (b.spatial) {
            case SpatialKind::gc:
                w[p + "spatial.weight"] = {{3, b.out, b.in}};
                w[p + "spatial.edge_importance"] = {{3, V, V}};
                break;
            case SpatialKind::agc:
                w[p + "spatial.weight"] = {{3, b.out, b.in}};
                w[p + "spatial.learned_adj"] = {{3, V, V}};
                w[p + "spatial.theta"] = {{3, b.embed_dim, b.in}};
                w[p + "spatial.phi"] = {{3, b.embed_dim, b.in}};
                break;
            case SpatialKind::ssa:
                w[p + "spatial.query"] = {{b.heads, b.key_dim, b.in}};
                w[p + "spatial.key"] = {{b.heads, b.key_dim, b.in}};
                w[p + "spatial.value"] = {{b.heads, b.value_dim, b.in}};
                w[p + "spatial.out_proj"] = {{b.out, b.heads * b.value_dim}};
                break;
        }
        bn(p + "spatial.bn", b.out);
        if (b.spatial_residual == ResidualKind::projection) w[p + "spatial.residual"] = {{b.out, b.in}};
        w[p + "tcn.kernel"] = {{b.out, b.out, b.kernel}};
        w[p + "tcn.bias"] = {{b.out}};
        bn(p + "tcn.bn", b.out);
        if (b.residual == ResidualKind::projection) w[p + "residual"] = {{b.out, b.in}};
    }
    w["fc.weight"] = {{cfg.num_classes, cfg.out_channels()}};
    w["fc.bias"] = {{cfg.num_classes}};
    return w;
}

}  // namespace costgcn
