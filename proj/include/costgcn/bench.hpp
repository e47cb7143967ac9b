#pragma once

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "costgcn/clip_io.hpp"
#include "costgcn/config.hpp"
#include "costgcn/network.hpp"
#include "costgcn/random_init.hpp"

namespace costgcn {

struct BenchOptions {
    std::size_t reps = 5;       // timed repetitions per mode (median is reported)
    std::size_t frames = 200;   // stream frames per step-mode repetition
    std::size_t clip_T = 0;     // 0: the config's t_ref
    std::uint32_t seed = 0;
};

struct BenchResult {
    std::string clip_config, step_config;
    std::size_t clip_T = 0, reps = 0, frames = 0;
    double clip_preds_per_s = 0;  // median over repetitions
    double step_preds_per_s = 0;
    double ratio = 0;              // step / clip
    std::size_t step_preds = 0;    // predictions in one step repetition
    std::uint64_t checksum = 0;    // bit pattern digest of computed logits (deterministic)
};

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double seconds_of(const std::function<void()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline void digest(std::uint64_t& h, const Tensor& t) {
    for (float v : t.data()) {
        h ^= std::bit_cast<std::uint32_t>(v);
        h *= 1099511628211ull;
    }
}

}  // namespace detail

// Clip mode: forward_clip of the regular config on T-frame clips.
// Step mode: forward_step of the continual config on a warmed-up stream.
// Both share one random weight store; each mode gets one untimed warm-up pass.
inline BenchResult run_bench(const NetworkConfig& clip_cfg, const NetworkConfig& step_cfg, const BenchOptions& opt) {
    if (opt.reps == 0 || opt.frames == 0) throw ConfigError("bench: reps and frames must be positive");
    BenchResult r;
    r.clip_config = clip_cfg.name;
    r.step_config = step_cfg.name;
    r.clip_T = opt.clip_T ? opt.clip_T : clip_cfg.t_ref;
    r.reps = opt.reps;
    r.frames = opt.frames;
    r.checksum = 1469598103934665603ull;

    const WeightStore weights = init_random(clip_cfg, opt.seed);
    const Model clip_model = bind_model(clip_cfg, weights);
    const Model step_model = bind_model(step_cfg, weights);
    const Tensor clip = random_clip(clip_cfg.in_channels, r.clip_T, clip_cfg.num_joints(), 1, opt.seed + 1);

    detail::digest(r.checksum, forward_clip(clip_model, clip));  // warm-up
    std::vector<double> clip_rates;
    for (std::size_t i = 0; i < opt.reps; ++i)
        clip_rates.push_back(1.0 / detail::seconds_of([&] { forward_clip(clip_model, clip); }));

    // Synthetic stream: the clip's frames, cycled.
    StreamState state = init_stream(step_model, 1);
    std::size_t t = 0;
    auto feed = [&](std::size_t n) {
        std::size_t preds = 0;
        for (std::size_t k = 0; k < n; ++k, ++t) {
            if (auto p = forward_step(step_model, state, clip_frame(clip, t % r.clip_T))) {
                ++preds;
                detail::digest(r.checksum, p->logits);
            }
        }
        return preds;
    };
    feed(total_delay(step_cfg) + opt.frames);  // fill the receptive field, then one warm-up pass
    std::vector<double> step_rates;
    for (std::size_t i = 0; i < opt.reps; ++i) {
        std::size_t preds = 0;
        const double s = detail::seconds_of([&] { preds = feed(opt.frames); });
        if (preds == 0) throw ConfigError("bench: no predictions in " + std::to_string(opt.frames) + " frames");
        r.step_preds = preds;
        step_rates.push_back(static_cast<double>(preds) / s);
    }
    r.clip_preds_per_s = detail::median(clip_rates);
    r.step_preds_per_s = detail::median(step_rates);
    r.ratio = r.step_preds_per_s / r.clip_preds_per_s;
    return r;
}

inline nlohmann::json to_json(const BenchResult& r) {
    return {{"clip_config", r.clip_config},       {"step_config", r.step_config},
            {"clip_T", r.clip_T},                 {"reps", r.reps},
            {"frames", r.frames},                 {"clip_preds_per_s", r.clip_preds_per_s},
            {"step_preds_per_s", r.step_preds_per_s}, {"ratio", r.ratio},
            {"step_preds", r.step_preds}};
}

}  // namespace costgcn
