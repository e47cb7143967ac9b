#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "costgcn/tensor.hpp"

namespace costgcn {

using Edge = std::pair<std::size_t, std::size_t>;

// Joint/bone topology. Edges are unordered bones.
struct SkeletonGraph {
    std::size_t num_joints = 0;
    std::vector<Edge> edges;
    std::size_t center = 0;
    std::string name = "custom";
};

enum class SkeletonPreset { ntu25, openpose18 };

namespace detail {

// NTU RGB+D Kinect v2 bones, 1-based joint ids as published with the dataset.
inline constexpr std::array<std::pair<int, int>, 24> kNtuBones{{
    {1, 2},   {2, 21},  {3, 21},  {4, 3},   {5, 21},  {6, 5},   {7, 6},   {8, 7},
    {9, 21},  {10, 9},  {11, 10}, {12, 11}, {13, 1},  {14, 13}, {15, 14}, {16, 15},
    {17, 1},  {18, 17}, {19, 18}, {20, 19}, {22, 23}, {23, 8},  {24, 25}, {25, 12},
}};

// OpenPose COCO-18 bones, 0-based.
inline constexpr std::array<std::pair<int, int>, 17> kOpenPoseBones{{
    {4, 3},  {3, 2},  {7, 6},  {6, 5},  {13, 12}, {12, 11}, {10, 9},  {9, 8},  {11, 5},
    {8, 2},  {5, 1},  {2, 1},  {0, 1},  {15, 0},  {14, 0},  {17, 15}, {16, 14},
}};

}  // namespace detail

inline void validate(const SkeletonGraph& g) {
    if (g.num_joints == 0) throw ConfigError("skeleton: V must be positive");
    if (g.center >= g.num_joints) {
        throw ConfigError("skeleton: center joint " + std::to_string(g.center) + " out of range [0, " +
                          std::to_string(g.num_joints) + ")");
    }
    for (auto [i, j] : g.edges) {
        if (i >= g.num_joints || j >= g.num_joints) {
            throw ConfigError("skeleton: edge (" + std::to_string(i) + "," + std::to_string(j) +
                              ") out of range [0, " + std::to_string(g.num_joints) + ")");
        }
        if (i == j) throw ConfigError("skeleton: self-loop edge on joint " + std::to_string(i));
    }
}

inline SkeletonGraph custom_skeleton(std::size_t V, std::vector<Edge> edges, std::size_t center) {
    SkeletonGraph g{V, std::move(edges), center, "custom"};
    validate(g);
    return g;
}

// ntu25: center is joint 21 in 1-based numbering (spine), index 20.
// openpose18: center is the neck, index 1.
inline SkeletonGraph build_skeleton(SkeletonPreset preset) {
    SkeletonGraph g;
    if (preset == SkeletonPreset::ntu25) {
        g.num_joints = 25;
        g.center = 20;
        g.name = "ntu25";
        for (auto [a, b] : detail::kNtuBones)
            g.edges.emplace_back(static_cast<std::size_t>(a - 1), static_cast<std::size_t>(b - 1));
    } else {
        g.num_joints = 18;
        g.center = 1;
        g.name = "openpose18";
        for (auto [a, b] : detail::kOpenPoseBones)
            g.edges.emplace_back(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
    }
    return g;
}

inline constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();

// BFS hop distance of every joint to the center joint; kUnreachable if disconnected.
inline std::vector<std::size_t> hop_distances(const SkeletonGraph& g) {
    std::vector<std::vector<std::size_t>> nbr(g.num_joints);
    for (auto [i, j] : g.edges) {
        nbr[i].push_back(j);
        nbr[j].push_back(i);
    }
    std::vector<std::size_t> hop(g.num_joints, kUnreachable);
    std::queue<std::size_t> q;
    hop[g.center] = 0;
    q.push(g.center);
    while (!q.empty()) {
        std::size_t u = q.front();
        q.pop();
        for (std::size_t v : nbr[u]) {
            if (hop[v] == kUnreachable) {
                hop[v] = hop[u] + 1;
                q.push(v);
            }
        }
    }
    return hop;
}

inline bool is_connected(const SkeletonGraph& g) {
    auto hop = hop_distances(g);
    return std::none_of(hop.begin(), hop.end(), [](std::size_t h) { return h == kUnreachable; });
}

// Parent of every joint on the BFS tree toward the center (lowest-index
// neighbour one hop closer). The center, and unreachable joints, map to themselves.
inline std::vector<std::size_t> bfs_parents(const SkeletonGraph& g) {
    auto hop = hop_distances(g);
    std::vector<std::size_t> parent(g.num_joints);
    for (std::size_t i = 0; i < g.num_joints; ++i) parent[i] = i;
    for (auto [a, b] : g.edges) {
        for (auto [child, par] : {Edge{a, b}, Edge{b, a}}) {
            if (hop[child] != kUnreachable && hop[child] > 0 && hop[par] + 1 == hop[child] &&
                (parent[child] == child || par < parent[child])) {
                parent[child] = par;
            }
        }
    }
    return parent;
}

// Spatial partition into root / closer-to-center / remaining neighbour subsets.
// A[0] = I; A[1](i,j) = 1 iff (i,j) is a bone and hop(j) < hop(i); A[2](i,j) = 1
// iff (i,j) is a bone and hop(j) >= hop(i). Disconnected joints count as infinitely far.
inline std::array<Tensor, 3> partition(const SkeletonGraph& g, const std::vector<std::size_t>& hop) {
    const std::size_t V = g.num_joints;
    if (hop.size() != V) throw DimensionError("partition: hop vector length mismatch");
    std::array<Tensor, 3> A{Tensor::identity(V), Tensor({V, V}), Tensor({V, V})};
    for (auto [a, b] : g.edges) {
        for (auto [i, j] : {Edge{a, b}, Edge{b, a}}) {
            if (hop[j] < hop[i])
                A[1](i, j) = 1.0f;
            else
                A[2](i, j) = 1.0f;
        }
    }
    return A;
}

inline std::array<Tensor, 3> partition(const SkeletonGraph& g) { return partition(g, hop_distances(g)); }

inline constexpr float kDegreeEps = 1e-6f;

// D_out^{-1/2} A D_in^{-1/2}: row sums on the left, column sums on the right.
// Equals D^{-1/2} A D^{-1/2} for symmetric A; every nonzero entry has both
// degrees >= its own weight, so directed subsets stay bounded.
inline Tensor normalize(const Tensor& A, float eps = kDegreeEps) {
    if (A.rank() != 2 || A.dim(0) != A.dim(1)) throw DimensionError("normalize: expected a square matrix");
    const std::size_t V = A.dim(0);
    std::vector<double> row(V, 0.0), col(V, 0.0);
    for (std::size_t i = 0; i < V; ++i)
        for (std::size_t j = 0; j < V; ++j) {
            row[i] += A(i, j);
            col[j] += A(i, j);
        }
    Tensor out({V, V});
    for (std::size_t i = 0; i < V; ++i)
        for (std::size_t j = 0; j < V; ++j)
            if (A(i, j) != 0.0f) out(i, j) = static_cast<float>(A(i, j) / std::sqrt((row[i] + eps) * (col[j] + eps)));
    return out;
}

// The three normalised partition matrices.
struct AdjacencySet {
    std::array<Tensor, 3> A;
    std::size_t num_joints() const { return A[0].dim(0); }
};

inline AdjacencySet make_adjacency(const SkeletonGraph& g, float eps = kDegreeEps) {
    auto parts = partition(g);
    return {{normalize(parts[0], eps), normalize(parts[1], eps), normalize(parts[2], eps)}};
}

// {"V": int, "edges": [[i,j],...], "center": int}
inline SkeletonGraph skeleton_from_json(const nlohmann::json& j) {
    try {
        std::vector<Edge> edges;
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw ConfigError("skeleton: each edge must be a pair");
            edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
        }
        return custom_skeleton(j.at("V").get<std::size_t>(), std::move(edges),
                               j.at("center").get<std::size_t>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("skeleton json: ") + e.what());
    }
}

inline nlohmann::json skeleton_to_json(const SkeletonGraph& g) {
    nlohmann::json edges = nlohmann::json::array();
    for (auto [i, j] : g.edges) edges.push_back({i, j});
    return {{"V", g.num_joints}, {"edges", edges}, {"center", g.center}};
}

}  // namespace costgcn
