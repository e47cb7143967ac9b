#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "costgcn/clip_io.hpp"
#include "costgcn/config.hpp"
#include "costgcn/network.hpp"
#include "costgcn/random_init.hpp"

// Clip/step equivalence harness. The clip path is the oracle: a continual
// stream must reproduce the padding-0 clip outputs frame for frame.

namespace costgcn {

inline constexpr double kVerifyTolerance = 1e-4;

struct Diff {
    double max_abs = 0.0;
    std::size_t compared = 0;
    std::string failure;  // structural mismatch (missing emission, wrong frame index)

    void add(const Tensor& a, const Tensor& b) {
        if (a.shape() != b.shape()) {
            fail("shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
            return;
        }
        max_abs = std::max(max_abs, static_cast<double>(max_abs_diff(a, b)));
        ++compared;
    }
    void merge(const Diff& o) {
        max_abs = std::max(max_abs, o.max_abs);
        compared += o.compared;
        if (failure.empty()) failure = o.failure;
    }
    void fail(const std::string& why) {
        if (failure.empty()) failure = why;
        max_abs = std::numeric_limits<double>::infinity();
    }
    bool ok(double tol = kVerifyTolerance) const { return failure.empty() && compared > 0 && max_abs <= tol; }
};

// Streams `clip` [C0, T, V, M] through `step_model` and compares against the
// clip path of `clip_model`: per-emission block-stack features against the
// full-clip features, and per-emission logits against forward_clip on the
// prefix window the prediction covers. `clip_model` must be unpadded.
inline Diff network_equivalence(const Model& clip_model, const Model& step_model, const Tensor& clip) {
    const auto& cfg = clip_model.config;
    const std::size_t T = clip.dim(1), M = clip.dim(3);
    const std::size_t delay = total_delay(cfg), sNN = cfg.network_stride(), w = cfg.effective_pool_window();
    Diff d;

    std::vector<Tensor> reference;  // per person [C, T', V]
    for (std::size_t m = 0; m < M; ++m) reference.push_back(forward_features(clip_model, person_clip(clip, m)));
    const std::size_t expected = reference.front().dim(1);

    StreamState features_state = init_stream(step_model, M);
    StreamState logits_state = init_stream(step_model, M);
    std::size_t j = 0;
    for (std::size_t t = 0; t < T; ++t) {
        const Tensor frame = clip_frame(clip, t);
        auto feats = forward_step_features(step_model, features_state, frame);
        auto pred = forward_step(step_model, logits_state, frame);
        if (bool(feats) != bool(pred)) {
            d.fail("feature and logit streams disagree at frame " + std::to_string(t));
            return d;
        }
        if (!feats) continue;
        if (j >= expected) {
            d.fail("extra emission at frame " + std::to_string(t));
            return d;
        }
        if (t != delay + j * sNN || pred->frame_index != t) {
            d.fail("emission " + std::to_string(j) + " at frame " + std::to_string(t) + ", expected " +
                   std::to_string(delay + j * sNN));
            return d;
        }
        for (std::size_t m = 0; m < M; ++m) {
            const auto& ref = reference[m];
            Tensor col({ref.dim(0), ref.dim(2)});
            for (std::size_t c = 0; c < ref.dim(0); ++c)
                for (std::size_t v = 0; v < ref.dim(2); ++v) col(c, v) = ref(c, j, v);
            d.add((*feats)[m], col);
        }
        const std::size_t span = std::min(j + 1, w);
        const std::size_t first = (j + 1 - span) * sNN;
        Tensor window({clip.dim(0), t - first + 1, clip.dim(2), M});
        for (std::size_t c = 0; c < clip.dim(0); ++c)
            for (std::size_t k = first; k <= t; ++k)
                for (std::size_t v = 0; v < clip.dim(2); ++v)
                    for (std::size_t m = 0; m < M; ++m) window(c, k - first, v, m) = clip(c, k, v, m);
        d.add(pred->logits, forward_clip(clip_model, window));
        ++j;
    }
    if (j != expected) d.fail(std::to_string(j) + " emissions, clip produced " + std::to_string(expected));
    return d;
}

inline Diff network_equivalence(const Model& model, const Tensor& clip) {
    return network_equivalence(model, model, clip);
}

// Shifts every active residual delay by one frame (down when already at the
// extent limit). Used as a negative control: the stream must then diverge.
inline NetworkConfig corrupt_delays(NetworkConfig cfg) {
    for (auto& b : cfg.blocks) {
        if (b.residual == ResidualKind::none) continue;
        b.residual_delay = b.residual_delay + 1 < b.extent() ? b.residual_delay + 1 : b.residual_delay - 1;
    }
    return cfg;
}

// Single-block network of the given spatial kind on the tiny 5-joint skeleton:
// 3 -> 8 channels, K = 5, stride 2, projected residual.
inline NetworkConfig block_case_config(SpatialKind kind) {
    NetworkConfig cfg = preset(PresetKind::stgcn, Variant::reg, Scale::tiny);
    BlockSpec b;
    b.spatial = kind;
    b.in = cfg.in_channels;
    b.out = 8;
    b.kernel = 5;
    b.stride = 2;
    b.residual = ResidualKind::projection;
    b.spatial_residual = kind == SpatialKind::gc ? ResidualKind::none : ResidualKind::projection;
    b.residual_delay = compute_delay(b.kernel, b.dilation, b.padding_frames());
    b.embed_dim = 2;
    b.heads = 2;
    b.key_dim = 2;
    b.value_dim = 2;
    cfg.blocks = {b};
    cfg.name = std::string(to_string(kind)) + "-block-reg";
    return convert(cfg, ConvertTarget::co).first;
}

struct VerifyCase {
    std::string label;
    Diff diff;
};

struct VerifyReport {
    std::vector<VerifyCase> cases;
    bool pass() const {
        return std::all_of(cases.begin(), cases.end(), [](const VerifyCase& c) { return c.diff.ok(); });
    }
};

inline std::size_t verify_clip_length(const NetworkConfig& cfg, Scale scale) {
    const std::size_t base = scale == Scale::tiny ? 64 : 48;
    return std::max(base, total_delay(cfg) + base);
}

// One equivalence case for an unpadded config: random weights and clip from `seed`.
inline Diff equivalence_case(const NetworkConfig& cfg, std::uint32_t seed, std::size_t T, bool corrupt = false) {
    const WeightStore weights = init_random(cfg, seed);
    const Model clip_model = bind_model(cfg, weights);
    const Tensor clip = random_clip(cfg.in_channels, T, cfg.num_joints(), 1, seed + 1000003u);
    if (!corrupt) return network_equivalence(clip_model, clip);
    return network_equivalence(clip_model, bind_model(corrupt_delays(cfg), weights), clip);
}

// Block kinds (GC, frame-scope AGC, SSA) plus the full preset network at the
// requested scale, all converted to the continual form.
inline VerifyReport run_verify(PresetKind kind, std::uint32_t seed, Scale scale, bool corrupt_delay = false) {
    VerifyReport report;
    for (SpatialKind k : {SpatialKind::gc, SpatialKind::agc, SpatialKind::ssa}) {
        const NetworkConfig cfg = block_case_config(k);
        report.cases.push_back({std::string(to_string(k)) + " block",
                                equivalence_case(cfg, seed, verify_clip_length(cfg, Scale::tiny), corrupt_delay)});
    }
    const NetworkConfig net = preset(kind, Variant::co, scale);
    report.cases.push_back(
        {net.name + " network", equivalence_case(net, seed, verify_clip_length(net, scale), corrupt_delay)});
    return report;
}

}  // namespace costgcn
