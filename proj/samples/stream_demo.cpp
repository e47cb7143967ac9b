// Streams a synthetic clip through a tiny continual ST-GCN and prints each
// prediction next to the clip-mode result for the same window.

#include <cstdio>

#include "costgcn/costgcn.hpp"

using namespace costgcn;

int main() {
    const NetworkConfig cfg = preset(PresetKind::stgcn, Variant::co, Scale::tiny);
    const Model model = bind_model(cfg, init_random(cfg, 1));
    const Tensor clip = random_clip(cfg.in_channels, 48, cfg.num_joints(), 1, 2);

    std::printf("%s: first prediction after frame %zu, then every %zu frames\n", cfg.name.c_str(), total_delay(cfg),
                cfg.network_stride());

    StreamState state = init_stream(model);
    for (std::size_t t = 0; t < clip.dim(1); ++t) {
        const auto pred = forward_step(model, state, clip_frame(clip, t));
        if (!pred) continue;
        const auto ranked = top_k(pred->logits, 2);
        std::printf("frame %3zu  top class %zu (%.4f), runner-up %zu\n", pred->frame_index, ranked[0],
                    pred->logits[ranked[0]], ranked[1]);
    }
    std::printf("state held: %zu floats\n", state.state_floats());
}
