#include <gtest/gtest.h>

#include <cmath>

#include "costgcn/blocks.hpp"
#include "costgcn/graph.hpp"
#include "oracles.hpp"

using namespace costgcn;

namespace {

constexpr std::size_t V = 4;

std::shared_ptr<const AdjacencySet> path_adjacency() {
    return std::make_shared<const AdjacencySet>(make_adjacency(custom_skeleton(V, {{0, 1}, {1, 2}, {2, 3}}, 1)));
}

BatchNorm random_bn(std::size_t C, std::uint32_t seed) {
    return {oracle::rand({C}, seed, 0.5f, 1.5f), oracle::rand({C}, seed + 1, -0.2f, 0.2f),
            oracle::rand({C}, seed + 2, -0.2f, 0.2f), oracle::rand({C}, seed + 3, 0.5f, 1.5f)};
}

Residual random_res(std::size_t ci, std::size_t co, std::uint32_t seed) {
    return Residual::projection(oracle::rand({co, ci}, seed, -0.5f, 0.5f));
}

GcParams gc_params(std::size_t ci, std::size_t co, std::uint32_t seed) {
    GcParams p;
    for (std::size_t s = 0; s < 3; ++s) {
        p.weight[s] = oracle::rand({co, ci}, seed + s, -0.5f, 0.5f);
        p.edge_importance[s] = oracle::rand({V, V}, seed + 10 + s, 0.8f, 1.2f);
    }
    p.bn = random_bn(co, seed + 20);
    p.res = random_res(ci, co, seed + 30);
    return p;
}

AgcParams agc_params(std::size_t ci, std::size_t co, std::size_t ce, std::uint32_t seed) {
    AgcParams p;
    for (std::size_t s = 0; s < 3; ++s) {
        p.weight[s] = oracle::rand({co, ci}, seed + s, -0.5f, 0.5f);
        p.learned_adj[s] = oracle::rand({V, V}, seed + 10 + s, -0.1f, 0.1f);
        p.theta[s] = oracle::rand({ce, ci}, seed + 20 + s);
        p.phi[s] = oracle::rand({ce, ci}, seed + 30 + s);
    }
    p.bn = random_bn(co, seed + 40);
    p.res = random_res(ci, co, seed + 50);
    return p;
}

SsaParams ssa_params(std::size_t ci, std::size_t co, std::size_t heads, std::size_t dk, std::size_t dv,
                     std::uint32_t seed) {
    SsaParams p;
    for (std::size_t s = 0; s < heads; ++s) {
        p.query.push_back(oracle::rand({dk, ci}, seed + 3 * s));
        p.key.push_back(oracle::rand({dk, ci}, seed + 3 * s + 1));
        p.value.push_back(oracle::rand({dv, ci}, seed + 3 * s + 2));
    }
    p.out_proj = oracle::rand({co, heads * dv}, seed + 100, -0.5f, 0.5f);
    p.bn = random_bn(co, seed + 110);
    p.res = random_res(ci, co, seed + 120);
    return p;
}

// relu(res + bn(agg)) on double accumulators.
Tensor finish(const std::vector<double>& agg, const Tensor& h, const BatchNorm& bn, const Residual& res,
              std::size_t co) {
    const std::size_t ci = h.dim(0);
    Tensor out({co, V});
    for (std::size_t o = 0; o < co; ++o)
        for (std::size_t v = 0; v < V; ++v) {
            double y = (agg[o * V + v] - bn.mean[o]) / std::sqrt(double(bn.var[o]) + bn.eps) * bn.gamma[o] + bn.beta[o];
            if (res.kind == ResidualKind::identity) y += h(o, v);
            if (res.kind == ResidualKind::projection)
                for (std::size_t i = 0; i < ci; ++i) y += double(res.weight(o, i)) * h(i, v);
            out(o, v) = static_cast<float>(std::max(0.0, y));
        }
    return out;
}

// sum_p (W_p h) A_eff_p, column v = sum_u (W_p h)[:, u] A_eff_p(u, v).
std::vector<double> mix_aggregate(const Tensor& h, const std::array<Tensor, 3>& W,
                                  const std::array<Tensor, 3>& A_eff, std::size_t co) {
    const std::size_t ci = h.dim(0);
    std::vector<double> agg(co * V, 0.0);
    for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t o = 0; o < co; ++o)
            for (std::size_t u = 0; u < V; ++u) {
                double wh = 0;
                for (std::size_t i = 0; i < ci; ++i) wh += double(W[s](o, i)) * h(i, u);
                for (std::size_t v = 0; v < V; ++v) agg[o * V + v] += wh * A_eff[s](u, v);
            }
    return agg;
}

Tensor gc_oracle(const Tensor& h, const AdjacencySet& adj, const GcParams& p) {
    std::array<Tensor, 3> eff;
    for (std::size_t s = 0; s < 3; ++s) {
        eff[s] = adj.A[s];
        for (std::size_t i = 0; i < eff[s].size(); ++i) eff[s][i] *= p.edge_importance[s][i];
    }
    const std::size_t co = p.weight[0].dim(0);
    return finish(mix_aggregate(h, p.weight, eff, co), h, p.bn, p.res, co);
}

Tensor attention_oracle(const Tensor& h, const Tensor& theta, const Tensor& phi) {
    Tensor C({V, V});
    for (std::size_t u = 0; u < V; ++u) {
        std::vector<double> row(V);
        for (std::size_t v = 0; v < V; ++v)
            for (std::size_t c = 0; c < theta.dim(0); ++c) {
                double a = 0, b = 0;
                for (std::size_t i = 0; i < h.dim(0); ++i) {
                    a += double(theta(c, i)) * h(i, u);
                    b += double(phi(c, i)) * h(i, v);
                }
                row[v] += a * b;
            }
        const auto sm = oracle::softmax(row);
        for (std::size_t v = 0; v < V; ++v) C(u, v) = static_cast<float>(sm[v]);
    }
    return C;
}

Tensor agc_oracle(const Tensor& h, const AdjacencySet& adj, const AgcParams& p) {
    std::array<Tensor, 3> eff;
    for (std::size_t s = 0; s < 3; ++s) {
        eff[s] = attention_oracle(h, p.theta[s], p.phi[s]);
        for (std::size_t i = 0; i < eff[s].size(); ++i) eff[s][i] += adj.A[s][i] + p.learned_adj[s][i];
    }
    const std::size_t co = p.weight[0].dim(0);
    return finish(mix_aggregate(h, p.weight, eff, co), h, p.bn, p.res, co);
}

Tensor ssa_oracle(const Tensor& h, const SsaParams& p) {
    const std::size_t ci = h.dim(0), co = p.out_proj.dim(0);
    std::vector<std::vector<double>> cat;  // rows of the concatenated head output
    for (std::size_t s = 0; s < p.query.size(); ++s) {
        const std::size_t dk = p.query[s].dim(0), dv = p.value[s].dim(0);
        auto proj = [&](const Tensor& W, std::size_t r, std::size_t u) {
            double acc = 0;
            for (std::size_t i = 0; i < ci; ++i) acc += double(W(r, i)) * h(i, u);
            return acc;
        };
        std::vector<std::vector<double>> head(dv, std::vector<double>(V, 0.0));
        for (std::size_t i = 0; i < V; ++i) {
            std::vector<double> logits(V);
            for (std::size_t j = 0; j < V; ++j) {
                for (std::size_t r = 0; r < dk; ++r) logits[j] += proj(p.query[s], r, i) * proj(p.key[s], r, j);
                logits[j] /= std::sqrt(double(dk));
            }
            const auto attn = oracle::softmax(logits);
            for (std::size_t r = 0; r < dv; ++r)
                for (std::size_t j = 0; j < V; ++j) head[r][i] += attn[j] * proj(p.value[s], r, j);
        }
        cat.insert(cat.end(), head.begin(), head.end());
    }
    std::vector<double> agg(co * V, 0.0);
    for (std::size_t o = 0; o < co; ++o)
        for (std::size_t r = 0; r < cat.size(); ++r)
            for (std::size_t v = 0; v < V; ++v) agg[o * V + v] += double(p.out_proj(o, r)) * cat[r][v];
    return finish(agg, h, p.bn, p.res, co);
}

std::shared_ptr<const BlockParams> block(SpatialParams spatial, std::size_t ci, std::size_t cs, std::size_t co,
                                         std::size_t K, std::size_t s, std::size_t d, std::size_t pad,
                                         std::uint32_t seed) {
    auto p = std::make_shared<BlockParams>();
    p->spatial = std::move(spatial);
    p->tcn = make_temporal_kernel(oracle::rand({co, cs, K}, seed, -0.4f, 0.4f), oracle::rand({co}, seed + 1, -0.1f, 0.1f),
                                  s, d);
    p->tcn_bn = random_bn(co, seed + 2);
    p->res = random_res(ci, co, seed + 6);
    p->padding = pad;
    p->residual_delay = compute_delay(static_cast<std::int64_t>(K), static_cast<std::int64_t>(d),
                                      static_cast<std::int64_t>(pad));
    return p;
}

}  // namespace

TEST(Gc, ScalarHandExample) {
    AdjacencySet adj{{Tensor::identity(1), Tensor({1, 1}), Tensor({1, 1})}};
    GcParams p;
    p.weight = {Tensor::matrix({{1}}), Tensor::matrix({{0}}), Tensor::matrix({{0}})};
    p.edge_importance = {Tensor::matrix({{1}}), Tensor::matrix({{1}}), Tensor::matrix({{1}})};
    p.bn = BatchNorm::identity(1);
    p.res = Residual::identity();
    EXPECT_EQ(gc_forward(Tensor::matrix({{2}}), adj, p)(0, 0), 4.0f);
}

TEST(Gc, ZeroWeightsReduceToResidual) {
    const auto adj = path_adjacency();
    GcParams p = gc_params(3, 3, 1);
    for (auto& w : p.weight) w.fill(0.0f);
    p.bn = BatchNorm::identity(3);
    p.res = Residual::identity();
    const Tensor h = oracle::rand({3, V}, 2);
    EXPECT_EQ(gc_forward(h, *adj, p), relu(h));
}

TEST(Gc, MatchesLoopOracle) {
    const auto adj = path_adjacency();
    for (std::uint32_t seed = 0; seed < 10; ++seed) {
        const GcParams p = gc_params(3, 5, seed * 100);
        const Tensor h = oracle::rand({3, V}, seed);
        EXPECT_LE(max_abs_diff(gc_forward(h, *adj, p), gc_oracle(h, *adj, p)), 1e-5f) << "seed " << seed;
    }
}

TEST(Gc, ClipAppliesPerFrame) {
    const auto adj = path_adjacency();
    const GcParams p = gc_params(2, 3, 7);
    const Tensor H = oracle::rand({2, 6, V}, 8);
    const Tensor Y = gc_forward(H, *adj, p);
    for (std::size_t t = 0; t < 6; ++t)
        EXPECT_LE(max_abs_diff(oracle::frame(Y, t), gc_oracle(oracle::frame(H, t), *adj, p)), 1e-5f);
}

TEST(Agc, AttentionExamples) {
    AgcParams p = agc_params(3, 3, 2, 1);
    const Tensor zero({3, V});
    const Tensor uniform = agc_attention(zero, p, 0);
    for (float v : uniform.data()) EXPECT_FLOAT_EQ(v, 0.25f);

    AgcParams single;
    single.theta[0] = oracle::rand({2, 3}, 4);
    single.phi[0] = oracle::rand({2, 3}, 5);
    EXPECT_EQ(agc_attention(oracle::rand({3, 1}, 6), single, 0), Tensor::matrix({{1}}));
}

TEST(Agc, AttentionRowsAreStochastic) {
    const AgcParams p = agc_params(3, 3, 2, 9);
    for (std::size_t s = 0; s < 3; ++s) {
        const Tensor C = agc_attention(oracle::rand({3, V}, s, -2, 2), p, s);
        for (std::size_t i = 0; i < V; ++i) {
            double sum = 0;
            for (std::size_t j = 0; j < V; ++j) sum += C(i, j);
            EXPECT_NEAR(sum, 1.0, 1e-6);
        }
    }
}

TEST(Agc, MatchesLoopOracle) {
    const auto adj = path_adjacency();
    for (std::uint32_t seed = 0; seed < 10; ++seed) {
        const AgcParams p = agc_params(3, 5, 2, seed * 100);
        const Tensor h = oracle::rand({3, V}, seed);
        EXPECT_LE(max_abs_diff(agc_forward(h, *adj, p), agc_oracle(h, *adj, p)), 1e-5f) << "seed " << seed;
    }
}

TEST(Agc, UniformAttentionReducesToShiftedGc) {
    const auto adj = path_adjacency();
    AgcParams a = agc_params(3, 4, 2, 3);
    for (std::size_t s = 0; s < 3; ++s) {
        a.theta[s].fill(0.0f);
        a.phi[s].fill(0.0f);
        a.learned_adj[s].fill(0.0f);
    }
    AdjacencySet shifted = *adj;
    GcParams g;
    for (std::size_t s = 0; s < 3; ++s) {
        for (float& v : shifted.A[s].data()) v += 1.0f / V;
        g.weight[s] = a.weight[s];
        g.edge_importance[s] = Tensor({V, V}, 1.0f);
    }
    g.bn = a.bn;
    g.res = a.res;
    const Tensor h = oracle::rand({3, V}, 12);
    EXPECT_LE(max_abs_diff(agc_forward(h, *adj, a), gc_forward(h, shifted, g)), 1e-6f);
}

TEST(Agc, ZeroWeightsReduceToResidual) {
    const auto adj = path_adjacency();
    AgcParams p = agc_params(3, 3, 2, 4);
    for (auto& w : p.weight) w.fill(0.0f);
    p.bn = BatchNorm::identity(3);
    p.res = Residual::identity();
    const Tensor h = oracle::rand({3, V}, 2);
    EXPECT_EQ(agc_forward(h, *adj, p), relu(h));
}

TEST(Ssa, MatchesLoopOracle) {
    for (std::uint32_t seed = 0; seed < 10; ++seed) {
        const SsaParams p = ssa_params(3, 5, 2, 3, 2, seed * 100);
        const Tensor h = oracle::rand({3, V}, seed);
        EXPECT_LE(max_abs_diff(ssa_forward(h, p), ssa_oracle(h, p)), 1e-5f) << "seed " << seed;
    }
}

TEST(Ssa, SingleNodeIsValueProjection) {
    SsaParams p = ssa_params(3, 2, 1, 2, 2, 5);
    p.bn = BatchNorm::identity(2);
    p.res = Residual::none();
    const Tensor h = oracle::rand({3, 1}, 6);
    const Tensor ref = relu(oracle::matmul_loops(p.out_proj, oracle::matmul_loops(p.value[0], h)));
    EXPECT_LE(max_abs_diff(ssa_forward(h, p), ref), 1e-6f);
}

TEST(Ssa, ZeroQueryGivesMeanValue) {
    SsaParams p = ssa_params(3, 2, 1, 2, 2, 7);
    p.query[0].fill(0.0f);
    const Tensor h = oracle::rand({3, V}, 8);
    const Tensor heads = detail::ssa_heads(h, p);
    const Tensor v = oracle::matmul_loops(p.value[0], h);
    for (std::size_t r = 0; r < 2; ++r) {
        double mean = 0;
        for (std::size_t j = 0; j < V; ++j) mean += v(r, j) / V;
        for (std::size_t i = 0; i < V; ++i) EXPECT_NEAR(heads(r, i), mean, 1e-6);
    }
}

TEST(Block, DegenerateKernelComposes) {
    const auto adj = path_adjacency();
    GcParams g;
    g.weight = {Tensor::identity(2), Tensor({2, 2}), Tensor({2, 2})};
    for (auto& m : g.edge_importance) m = Tensor({V, V}, 1.0f);
    g.bn = BatchNorm::identity(2);
    auto p = std::make_shared<BlockParams>();
    p->spatial = g;
    p->tcn = make_temporal_kernel(Tensor({2, 2, 1}, {1, 0, 0, 1}), Tensor({2}));
    p->tcn_bn = BatchNorm::identity(2);
    p->res = Residual::identity();
    const Tensor H = oracle::rand({2, 5, V}, 3);
    // Spatial part: A_0 is I after normalisation, so the block is relu(H + relu(H)).
    Tensor ref = H;
    for (float& v : ref.data()) v = std::max(0.0f, v + std::max(0.0f, v));
    EXPECT_LE(max_abs_diff(*st_block_clip(H, *adj, *p), ref), 1e-6f);
}

TEST(Block, EqualPaddingKeepsLength) {
    const auto adj = path_adjacency();
    const auto p = block(gc_params(3, 4, 1), 3, 4, 4, 9, 1, 1, 4, 2);
    EXPECT_EQ(st_block_clip(oracle::rand({3, 12, V}, 3), *adj, *p)->dim(1), 12u);
}

TEST(Block, TooShortSignalsEmpty) {
    const auto adj = path_adjacency();
    const auto p = block(gc_params(3, 4, 1), 3, 4, 4, 9, 1, 1, 0, 2);
    EXPECT_FALSE(st_block_clip(oracle::rand({3, 8, V}, 3), *adj, *p).has_value());
}

TEST(Block, StreamMatchesClip) {
    const auto adj = path_adjacency();
    std::uint32_t seed = 0;
    for (std::size_t kind = 0; kind < 3; ++kind)
        for (std::size_t s : {1u, 2u})
            for (std::size_t d : {1u, 2u}) {
                seed += 1000;
                SpatialParams sp = kind == 0   ? SpatialParams(gc_params(3, 4, seed))
                                   : kind == 1 ? SpatialParams(agc_params(3, 4, 2, seed))
                                               : SpatialParams(ssa_params(3, 4, 2, 2, 2, seed));
                const auto p = block(sp, 3, 4, 5, 5, s, d, 0, seed + 500);
                const Tensor H = oracle::rand({3, 30, V}, seed + 1);
                const Tensor clip = *st_block_clip(H, *adj, *p);
                CoBlockState st(p, adj);
                std::vector<Tensor> got;
                for (std::size_t t = 0; t < 30; ++t)
                    if (auto y = st.step(oracle::frame(H, t))) got.push_back(*y);
                ASSERT_EQ(got.size(), clip.dim(1)) << "kind " << kind << " s=" << s << " d=" << d;
                EXPECT_LE(max_abs_diff(oracle::stack(got), clip), 1e-5f) << "kind " << kind << " s=" << s << " d=" << d;
            }
}

TEST(Block, UnitKernelStreamsEveryFrame) {
    const auto adj = path_adjacency();
    const auto p = block(gc_params(3, 4, 5), 3, 4, 4, 1, 1, 1, 0, 6);
    const Tensor H = oracle::rand({3, 7, V}, 7);
    const Tensor clip = *st_block_clip(H, *adj, *p);
    CoBlockState st(p, adj);
    for (std::size_t t = 0; t < 7; ++t) {
        auto y = st.step(oracle::frame(H, t));
        ASSERT_TRUE(y.has_value());
        EXPECT_LE(max_abs_diff(*y, oracle::frame(clip, t)), 1e-6f);
    }
}

TEST(Block, PaddedOutputShiftsToUnpaddedWithSameDelay) {
    // A padded block and its unpadded copy that keeps the padded residual delay
    // agree wherever the padded window holds no padding.
    const auto adj = path_adjacency();
    for (std::size_t pad : {1u, 2u, 4u}) {
        const auto padded = block(gc_params(3, 4, 9), 3, 4, 4, 9, 1, 1, pad, 10);
        auto unpadded = std::make_shared<BlockParams>(*padded);
        unpadded->padding = 0;
        const Tensor H = oracle::rand({3, 20, V}, 11);
        const Tensor a = *st_block_clip(H, *adj, *padded), b = *st_block_clip(H, *adj, *unpadded);
        for (std::size_t t = 0; t < b.dim(1); ++t)
            EXPECT_LE(max_abs_diff(oracle::frame(a, t + pad), oracle::frame(b, t)), 1e-6f) << "p=" << pad;
    }
}

TEST(Block, DelayBeyondExtentIsRejected) {
    const auto adj = path_adjacency();
    auto p = std::make_shared<BlockParams>(*block(gc_params(3, 4, 1), 3, 4, 4, 3, 1, 1, 0, 2));
    p->residual_delay = 3;
    EXPECT_THROW(CoBlockState(p, adj), ConfigError);
}
