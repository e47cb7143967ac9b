#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "costgcn/config.hpp"
#include "costgcn/tensor.hpp"
#include "costgcn/weights.hpp"

namespace costgcn {

// mt19937 with a fixed bits-to-float mapping, so draws do not depend on the
// standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint32_t seed) : engine_(seed) {}

    // Uniform in [0, 1) with 24 bits of resolution.
    float unit() { return static_cast<float>(engine_() >> 8) * (1.0f / 16777216.0f); }
    float uniform(float lo, float hi) { return lo + (hi - lo) * unit(); }
    std::uint32_t bits() { return engine_(); }

private:
    std::mt19937 engine_;
};

inline Tensor random_tensor(const Shape& shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
    Tensor t(shape);
    for (float& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

inline Tensor random_clip(std::size_t C, std::size_t T, std::size_t V, std::size_t M, std::uint32_t seed) {
    Rng rng(seed);
    return random_tensor({C, T, V, M}, rng);
}

namespace detail {

inline bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace detail

// Shape-correct synthetic weights for every tensor the config names. Matrices
// use U(-1/sqrt(fan_in), 1/sqrt(fan_in)); BN statistics stay near identity.
inline WeightStore init_random(const NetworkConfig& cfg, std::uint32_t seed) {
    using detail::ends_with;
    Rng rng(seed);
    WeightStore store;
    for (const auto& [name, spec] : weight_shapes(cfg)) {
        const Shape& s = spec.shape;
        float lo = -0.1f, hi = 0.1f;
        if (ends_with(name, ".gamma")) {
            lo = 0.8f, hi = 1.2f;
        } else if (ends_with(name, ".var")) {
            lo = 0.5f, hi = 1.5f;
        } else if (ends_with(name, ".edge_importance")) {
            lo = 0.9f, hi = 1.1f;
        } else if (ends_with(name, ".mean") || ends_with(name, ".beta") || ends_with(name, "bias") ||
                   ends_with(name, ".learned_adj")) {
            // defaults
        } else {
            std::size_t fan_in = 1;
            if (ends_with(name, "tcn.kernel")) {
                fan_in = s[1] * s[2];
            } else {
                fan_in = s.back();  // [.., C_out, C_in] or [C_out, C_in]
            }
            hi = 1.0f / std::sqrt(static_cast<float>(fan_in));
            lo = -hi;
        }
        store.emplace(name, random_tensor(s, rng, lo, hi));
    }
    return store;
}

}  // namespace costgcn
