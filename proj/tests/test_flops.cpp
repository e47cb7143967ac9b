#include <gtest/gtest.h>

#include "costgcn/costgcn.hpp"

using namespace costgcn;

namespace {

bool within(double value, double target, double rel) { return std::abs(value - target) <= rel * target; }

// A single K-tap block on a V-joint path.
NetworkConfig one_conv(std::size_t K, std::size_t C, std::size_t V_joints) {
    NetworkConfig cfg;
    std::vector<Edge> edges;
    for (std::size_t v = 1; v < V_joints; ++v) edges.push_back({v - 1, v});
    cfg.graph = custom_skeleton(V_joints, edges, 0);
    cfg.num_classes = 2;
    cfg.in_channels = C;
    cfg.t_ref = 1;
    BlockSpec b;
    b.in = b.out = C;
    b.kernel = K;
    b.padding = PaddingMode::zero;
    cfg.blocks = {b};
    return cfg;
}

}  // namespace

TEST(Flops, SingleMacIsTwo) {
    EXPECT_EQ(mac_flops(1, 1, 1, 1, 1), 2.0);
    EXPECT_EQ(conv_flops(1, 1, 1, 1, 1), 3.0);  // plus the bias add
    EXPECT_EQ(mac_flops(64, 64, 9, 25, 300), 2.0 * 64 * 64 * 9 * 25 * 300);
}

TEST(Flops, FcParams) {
    NetworkConfig cfg;
    cfg.graph = custom_skeleton(1, {}, 0);
    cfg.in_channels = 4;
    cfg.num_classes = 2;
    EXPECT_EQ(count_params(cfg), 10u);
}

TEST(Flops, PaperClipAndParams) {
    const auto stgcn = preset(PresetKind::stgcn, Variant::reg), agcn = preset(PresetKind::agcn, Variant::reg);
    EXPECT_TRUE(within(count_clip(stgcn, 300), 16.73e9, 0.10)) << count_clip(stgcn, 300);
    EXPECT_TRUE(within(count_params(stgcn), 3.14e6, 0.10)) << count_params(stgcn);
    EXPECT_TRUE(within(count_clip(agcn, 300), 18.69e9, 0.10)) << count_clip(agcn, 300);
    EXPECT_TRUE(within(count_params(agcn), 3.47e6, 0.10)) << count_params(agcn);
}

TEST(Flops, PaperStepAndReduction) {
    const auto reg = preset(PresetKind::stgcn, Variant::reg);
    const auto co = preset(PresetKind::stgcn, Variant::co), star = preset(PresetKind::stgcn, Variant::co_star);
    EXPECT_TRUE(within(count_step(co), 0.27e9, 0.15)) << count_step(co);
    EXPECT_TRUE(within(count_step(star), 0.16e9, 0.15)) << count_step(star);
    const auto r_co = make_report(reg, co, 300), r_star = make_report(reg, star, 300);
    EXPECT_TRUE(within(r_co.reduction_factor, 63.2, 0.15)) << r_co.reduction_factor;
    EXPECT_TRUE(within(r_star.reduction_factor, 107.7, 0.15)) << r_star.reduction_factor;
    EXPECT_EQ(r_co.frames_per_pred, 4u);
    EXPECT_EQ(r_star.frames_per_pred, 1u);
    EXPECT_NEAR(r_co.reduction_factor, r_co.clip_flops / r_co.step_flops_per_pred, 1e-9 * r_co.reduction_factor);
}

TEST(Flops, StridedStepCostsMorePerPrediction) {
    for (auto kind : {PresetKind::stgcn, PresetKind::agcn, PresetKind::str})
        EXPECT_GT(count_step(preset(kind, Variant::co)), count_step(preset(kind, Variant::co_star)));
}

TEST(Flops, ClipScalesLinearly) {
    for (auto kind : {PresetKind::stgcn, PresetKind::agcn, PresetKind::str}) {
        const auto cfg = preset(kind, Variant::reg);
        for (std::size_t T : {64u, 128u, 300u, 1000u}) {
            const double r = count_clip(cfg, 2 * T) / count_clip(cfg, T);
            EXPECT_NEAR(r, 2.0, 0.04) << to_string(kind) << " T=" << T;
        }
    }
}

TEST(Flops, StepRejectsPaddedConfig) {
    EXPECT_THROW(count_step(preset(PresetKind::stgcn, Variant::reg)), ModeError);
    EXPECT_THROW(count_state(preset(PresetKind::stgcn, Variant::reg)), ModeError);
}

TEST(State, SingleConvExample) {
    // 8 slots x 64 channels x 25 joints x 4 bytes.
    EXPECT_EQ(conv_state_bytes(9, 64, 25), 51200u);
    EXPECT_EQ(conv_state_bytes(1, 64, 25), 0u);
    // Ring plus a 1-slot pool window of C floats.
    EXPECT_EQ(count_state(one_conv(9, 64, 25)), 51200u + 4u * 64u);
}

TEST(State, ClosedFormForPresets) {
    for (auto v : {Variant::co, Variant::co_star}) {
        const auto cfg = preset(PresetKind::stgcn, v);
        std::uint64_t expected = 0;
        for (const auto& b : cfg.blocks) {
            expected += 4ull * 8 * b.out * 25;
            if (b.residual != ResidualKind::none) expected += 4ull * 4 * b.out * 25;
        }
        expected += 4ull * cfg.effective_pool_window() * 256;
        EXPECT_EQ(count_state(cfg), expected);
    }
}

TEST(State, MatchesLiveStream) {
    for (auto kind : {PresetKind::stgcn, PresetKind::agcn, PresetKind::str}) {
        const auto cfg = preset(kind, Variant::co_star, Scale::tiny);
        const Model model = bind_model(cfg, init_random(cfg, 1));
        StreamState st = init_stream(model);
        for (std::size_t t = 0; t < 100; ++t) forward_step(model, st, random_clip(3, 1, 5, 1, t).reshaped({3, 5, 1}));
        EXPECT_EQ(4 * st.state_floats(), count_state(cfg)) << to_string(kind);
    }
}

TEST(Report, JsonAndTable) {
    const auto r = make_report(preset(PresetKind::stgcn, Variant::reg), preset(PresetKind::stgcn, Variant::co), 300);
    const auto j = to_json(r);
    EXPECT_EQ(j.at("frames_per_pred"), 4);
    EXPECT_EQ(j.at("params").get<std::uint64_t>(), r.params);
    EXPECT_NE(format_table(r).find("reduction"), std::string::npos);
}
