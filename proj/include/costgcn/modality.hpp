#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "costgcn/graph.hpp"
#include "costgcn/numerics.hpp"
#include "costgcn/tensor.hpp"

namespace costgcn {

enum class ModalityKind { joints, bones, joint_motion, bone_motion };

inline const char* to_string(ModalityKind k) {
    switch (k) {
        case ModalityKind::joints: return "joints";
        case ModalityKind::bones: return "bones";
        case ModalityKind::joint_motion: return "joint_motion";
        case ModalityKind::bone_motion: return "bone_motion";
    }
    return "?";
}

inline ModalityKind modality_from(const std::string& s) {
    if (s == "joints") return ModalityKind::joints;
    if (s == "bones") return ModalityKind::bones;
    if (s == "joint_motion") return ModalityKind::joint_motion;
    if (s == "bone_motion") return ModalityKind::bone_motion;
    throw ConfigError("unknown modality '" + s + "' (joints|bones|joint_motion|bone_motion)");
}

inline bool needs_graph(ModalityKind k) { return k == ModalityKind::bones || k == ModalityKind::bone_motion; }

namespace detail {

// Bones of x [C, T, V, M]: each joint minus its BFS parent toward the center; the center stays zero.
inline Tensor bones_of(const Tensor& x, const SkeletonGraph& g) {
    const std::size_t C = x.dim(0), T = x.dim(1), V = x.dim(2), M = x.dim(3);
    if (V != g.num_joints) {
        throw DimensionError("bones: clip has " + std::to_string(V) + " joints, graph '" + g.name + "' has " +
                             std::to_string(g.num_joints));
    }
    const auto parent = bfs_parents(g);
    Tensor y(x.shape());
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t v = 0; v < V; ++v) {
                if (parent[v] == v) continue;  // center, or unreachable
                for (std::size_t m = 0; m < M; ++m) y(c, t, v, m) = x(c, t, v, m) - x(c, t, parent[v], m);
            }
    return y;
}

// frame_t - frame_{t-1} along axis 1; t = 0 is zero.
inline Tensor motion_of(const Tensor& x) {
    const std::size_t C = x.dim(0), T = x.dim(1), inner = x.size() / (C * T);
    Tensor y(x.shape());
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t = 1; t < T; ++t)
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t now = (c * T + t) * inner + i;
                y[now] = x[now] - x[now - inner];
            }
    return y;
}

}  // namespace detail

// clip: [C, T, V, M].
inline Tensor derive_modality(const Tensor& clip, ModalityKind kind, const SkeletonGraph* graph = nullptr) {
    if (clip.rank() != 4) throw DimensionError("derive_modality: expected [C,T,V,M], got " + shape_str(clip.shape()));
    if (needs_graph(kind) && graph == nullptr) {
        throw ConfigError(std::string("derive_modality: ") + to_string(kind) + " needs a skeleton graph");
    }
    switch (kind) {
        case ModalityKind::joints: return clip;
        case ModalityKind::bones: return detail::bones_of(clip, *graph);
        case ModalityKind::joint_motion: return detail::motion_of(clip);
        case ModalityKind::bone_motion: return detail::motion_of(detail::bones_of(clip, *graph));
    }
    return clip;
}

// Frame-at-a-time modality transform for [C, V, M] frames. Motion keeps one
// previous frame, so its output at t equals the clip transform at t.
class ModalityStream {
public:
    explicit ModalityStream(ModalityKind kind, std::optional<SkeletonGraph> graph = std::nullopt)
        : kind_(kind), graph_(std::move(graph)) {
        if (needs_graph(kind_) && !graph_) {
            throw ConfigError(std::string("modality stream: ") + to_string(kind_) + " needs a skeleton graph");
        }
    }

    Tensor step(const Tensor& frame) {
        if (frame.rank() != 3) throw DimensionError("modality stream: expected [C,V,M], got " + shape_str(frame.shape()));
        const Shape& s = frame.shape();
        Tensor x = frame.reshaped({s[0], 1, s[1], s[2]});
        if (needs_graph(kind_)) x = detail::bones_of(x, *graph_);
        if (kind_ == ModalityKind::joint_motion || kind_ == ModalityKind::bone_motion) {
            Tensor d(x.shape());
            if (prev_) {
                if (prev_->shape() != x.shape()) throw DimensionError("modality stream: frame shape changed");
                for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] - (*prev_)[i];
            }
            prev_ = std::move(x);
            x = std::move(d);
        }
        return x.reshaped(s);
    }

private:
    ModalityKind kind_;
    std::optional<SkeletonGraph> graph_;
    std::optional<Tensor> prev_;
};

// Sum of per-stream softmax scores.
inline Tensor fuse_scores(const std::vector<Tensor>& logits) {
    if (logits.empty()) throw ConfigError("fuse_scores: no score streams");
    const std::size_t n = logits.front().size();
    Tensor sum({n});
    for (const auto& l : logits) {
        if (l.size() != n) throw DimensionError("fuse_scores: streams disagree on class count");
        Tensor p = softmax_rows(l.reshaped({1, n}));
        for (std::size_t i = 0; i < n; ++i) sum[i] += p[i];
    }
    return sum;
}

// Index of the largest score; ties go to the lowest index.
inline std::size_t argmax(const Tensor& scores) {
    if (scores.size() == 0) throw DimensionError("argmax: empty tensor");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

// Top-k indices by descending score, ties by ascending index.
inline std::vector<std::size_t> top_k(const Tensor& scores, std::size_t k) {
    std::vector<std::size_t> idx(scores.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    idx.resize(std::min(k, idx.size()));
    return idx;
}

}  // namespace costgcn
