#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "strata/attention.hpp"
#include "strata/mask.hpp"
#include "strata/rng.hpp"

using namespace strata;

namespace {

// Independent scalar-loop oracle: explicit triple loops, no shared helpers
// with the library path. Softmax is normalized directly (no max
// subtraction); trig is recomputed from the table angles.
TokenTensor oracle_attention(const TokenTensor& x, const AttentionParams& p,
                             const std::vector<std::uint8_t>& token_mask,
                             const RopeTable* rope) {
    const std::int64_t n = x.total_tokens();
    const int d = p.d_model();
    const int hd = p.head_dim;

    auto project = [&](const Matrix& w) {
        std::vector<double> out(static_cast<std::size_t>(n) * d, 0.0);
        for (std::int64_t tok = 0; tok < n; ++tok) {
            const auto xv = x.token(tok);
            for (int c = 0; c < d; ++c) {
                double acc = 0.0;
                for (int k = 0; k < d; ++k) acc += xv[k] * w.at(k, c);
                out[tok * d + c] = acc;
            }
        }
        return out;
    };
    std::vector<double> q = project(p.wq), k = project(p.wk), v = project(p.wv);

    auto norm_rotate = [&](std::vector<double>& arr, const std::vector<double>& gain) {
        for (std::int64_t tok = 0; tok < n; ++tok) {
            for (int h = 0; h < p.heads; ++h) {
                double* head = arr.data() + tok * d + h * hd;
                double ss = 0.0;
                for (int c = 0; c < hd; ++c) ss += head[c] * head[c];
                const double inv = 1.0 / std::sqrt(ss / hd + 1e-6);
                for (int c = 0; c < hd; ++c) head[c] = head[c] * inv * gain[h * hd + c];
                if (rope != nullptr) {
                    const int frame = x.frame_of(tok);
                    for (int m = 0; m < hd / 2; ++m) {
                        const double a = rope->angle_at(frame, m);
                        const double c0 = std::cos(a), s0 = std::sin(a);
                        const double e = head[2 * m], o = head[2 * m + 1];
                        head[2 * m] = e * c0 - o * s0;
                        head[2 * m + 1] = e * s0 + o * c0;
                    }
                }
            }
        }
    };
    norm_rotate(q, p.q_gain);
    norm_rotate(k, p.k_gain);

    TokenTensor out = TokenTensor::zeros(x.frames, x.tokens_per_frame, d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<double> concat(d), weights(n);
    for (std::int64_t a = 0; a < n; ++a) {
        for (int h = 0; h < p.heads; ++h) {
            double denom = 0.0;
            for (std::int64_t b = 0; b < n; ++b) {
                weights[b] = 0.0;
                if (!token_mask.empty() && !token_mask[a * n + b]) continue;
                double dot = 0.0;
                for (int c = 0; c < hd; ++c) dot += q[a * d + h * hd + c] * k[b * d + h * hd + c];
                weights[b] = std::exp(scale * dot);
                denom += weights[b];
            }
            for (int c = 0; c < hd; ++c) {
                double acc = 0.0;
                for (std::int64_t b = 0; b < n; ++b) {
                    if (weights[b] == 0.0) continue;
                    acc += (weights[b] / denom) * v[b * d + h * hd + c];
                }
                concat[h * hd + c] = acc;
            }
        }
        for (int c = 0; c < d; ++c) {
            double acc = 0.0;
            for (int kk = 0; kk < d; ++kk) acc += concat[kk] * p.wo.at(kk, c);
            out.token(a)[c] = acc;
        }
    }
    return out;
}

double max_rel_err(const TokenTensor& a, const TokenTensor& b) {
    REQUIRE(a.same_shape(b));
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double err = std::abs(a.data[i] - b.data[i]) / (1.0 + std::abs(b.data[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

std::vector<MaskVariant> all_variants() {
    return {MaskVariant::ours(),          MaskVariant::no_anchor(),
            MaskVariant::fixed_stride(2), MaskVariant::aggressive_decay(),
            MaskVariant::conservative_decay(), MaskVariant::temporal_only(),
            MaskVariant::full_attention()};
}

} // namespace

TEST_CASE("single token: softmax over one element is the value path") {
    Rng rng(1);
    const auto params = AttentionParams::random(2, 4, rng);
    Rng xr(2);
    const auto x = TokenTensor::random(1, 1, 8, xr);
    std::vector<std::uint8_t> mask{1};
    const auto y = dense_masked_mha(x, params, mask);

    // attention weight is exactly 1, so the output is wo(v) with
    // v = wv(x): reproduce by hand
    std::vector<double> v(8), expect(8);
    vec_matmul(x.token(0), params.wv, v);
    vec_matmul(v, params.wo, expect);
    for (int c = 0; c < 8; ++c) {
        CHECK(y.token(0)[c] == Catch::Approx(expect[c]).margin(1e-12));
    }
}

TEST_CASE("identical keys and values: output ignores the queries") {
    Rng rng(3);
    const auto params = AttentionParams::random(2, 8, rng);
    // every token identical -> every value vector identical -> uniform or not,
    // the weighted sum equals that single value vector
    TokenTensor x = TokenTensor::zeros(2, 4, 16);
    Rng tok_rng(4);
    std::vector<double> one(16);
    for (auto& c : one) c = tok_rng.normal();
    for (std::int64_t a = 0; a < x.total_tokens(); ++a) {
        auto t = x.token(a);
        std::copy(one.begin(), one.end(), t.begin());
    }
    const auto y = dense_masked_mha(x, params, {});
    std::vector<double> v(16), expect(16);
    vec_matmul(std::span<const double>(one), params.wv, v);
    vec_matmul(v, params.wo, expect);
    for (std::int64_t a = 0; a < x.total_tokens(); ++a) {
        for (int c = 0; c < 16; ++c) {
            CHECK(y.token(a)[c] == Catch::Approx(expect[c]).margin(1e-9));
        }
    }
}

TEST_CASE("dense path matches the scalar oracle") {
    Rng prng(11);
    const auto params = AttentionParams::random(2, 8, prng);
    Rng xrng(12);
    const auto x = TokenTensor::random(4, 16, 16, xrng);

    SECTION("full mask, no rope") {
        const auto ours = dense_masked_mha(x, params, {});
        const auto ref = oracle_attention(x, params, {}, nullptr);
        CHECK(max_rel_err(ours, ref) < 1e-6);
    }
    SECTION("blocked mask, with rope") {
        const auto grid = GridSpec::make(4, 16, 4);
        const auto mask = build_block_mask(grid, MaskVariant::ours());
        const auto tok = expand_to_token_mask(mask);
        const auto rope = build_rope_table(8, 10000.0, 4);
        const auto ours = dense_masked_mha(x, params, tok, &rope);
        const auto ref = oracle_attention(x, params, tok, &rope);
        CHECK(max_rel_err(ours, ref) < 1e-6);
    }
}

TEST_CASE("attention weights are row-stochastic over admissible keys") {
    Rng prng(21);
    const auto params = AttentionParams::random(3, 8, prng);
    Rng xrng(22);
    const auto x = TokenTensor::random(4, 8, 24, xrng);
    const auto grid = GridSpec::make(4, 8, 4);
    const auto mask = build_block_mask(grid, MaskVariant::ours());

    AttentionTrace trace;
    block_sparse_mha(x, params, mask, nullptr, &trace);
    REQUIRE(trace.row_weight_sums.size() == 3u * 32u);
    for (double s : trace.row_weight_sums) {
        CHECK(s == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("sparse equals dense under the expanded mask, every variant") {
    const auto grid = GridSpec::make(4, 32, 8);
    const auto rope = build_rope_table(8, 10000.0, 4);
    for (const auto& variant : all_variants()) {
        const auto mask = build_block_mask(grid, variant);
        const auto tok = expand_to_token_mask(mask);
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            Rng prng(100 + seed);
            const auto params = AttentionParams::random(2, 8, prng);
            Rng xrng(200 + seed);
            const auto x = TokenTensor::random(4, 32, 16, xrng);
            INFO(variant.name() << " seed=" << seed);
            const auto dense = dense_masked_mha(x, params, tok, &rope);
            const auto sparse = block_sparse_mha(x, params, mask, &rope);
            CHECK(max_rel_err(sparse, dense) < 1e-5);
        }
    }
}

TEST_CASE("full-attention mask equals unmasked dense attention") {
    const auto grid = GridSpec::make(2, 16, 4);
    const auto mask = build_block_mask(grid, MaskVariant::full_attention());
    Rng prng(31);
    const auto params = AttentionParams::random(2, 4, prng);
    Rng xrng(32);
    const auto x = TokenTensor::random(2, 16, 8, xrng);
    const auto unmasked = dense_masked_mha(x, params, {});
    const auto sparse = block_sparse_mha(x, params, mask);
    CHECK(max_rel_err(sparse, unmasked) < 1e-6);
}

TEST_CASE("contract violations") {
    Rng prng(41);
    const auto params = AttentionParams::random(1, 4, prng);
    Rng xrng(42);
    const auto x = TokenTensor::random(2, 4, 4, xrng);

    SECTION("wrong mask size") {
        std::vector<std::uint8_t> bad(10, 1);
        CHECK_THROWS_AS(dense_masked_mha(x, params, bad), std::invalid_argument);
    }
    SECTION("fully masked row") {
        std::vector<std::uint8_t> mask(64, 1);
        for (int b = 0; b < 8; ++b) mask[3 * 8 + b] = 0;
        CHECK_THROWS_AS(dense_masked_mha(x, params, mask), std::invalid_argument);
    }
    SECTION("channel mismatch") {
        Rng r(43);
        const auto wide = TokenTensor::random(2, 4, 8, r);
        CHECK_THROWS_AS(dense_masked_mha(wide, params, {}), std::invalid_argument);
    }
    SECTION("grid mismatch") {
        const auto mask = build_block_mask(GridSpec::make(3, 4, 2), MaskVariant::ours());
        CHECK_THROWS_AS(block_sparse_mha(x, params, mask), std::invalid_argument);
    }
    SECTION("token cap") {
        const auto grid = GridSpec::make(2, 4, 2);
        const auto mask = build_block_mask(grid, MaskVariant::ours());
        CHECK_THROWS_AS(block_sparse_mha(x, params, mask, nullptr, nullptr, 4),
                        std::invalid_argument);
        CHECK_NOTHROW(block_sparse_mha(x, params, mask, nullptr, nullptr, 8));
    }
}

TEST_CASE("mini block: zero-init temporal projection is transparent") {
    Rng prng(51);
    auto params = MiniBlockParams::random(2, 4, 4, prng);
    REQUIRE(params.temporal.wo.a == Matrix::zeros(8, 8).a);

    const auto grid = GridSpec::make(2, 8, 4);
    const auto mask = build_block_mask(grid, MaskVariant::ours());
    const auto rope = build_rope_table(4, 10000.0, 2);
    Rng xrng(52);
    const auto x = TokenTensor::random(2, 8, 8, xrng);
    Rng crng(53);
    const auto ctx = TokenTensor::random(2, 3, 8, crng);

    const auto with_temporal = mini_4d_block_forward(x, ctx, params, mask, &rope);
    const auto without = mini_4d_block_forward(x, ctx, params, mask, &rope,
                                               MiniBlockToggles{.temporal = false});
    double worst = 0.0;
    for (std::size_t i = 0; i < with_temporal.data.size(); ++i) {
        worst = std::max(worst, std::abs(with_temporal.data[i] - without.data[i]));
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("mini block: zero context with zero value projection adds nothing") {
    Rng prng(61);
    auto params = MiniBlockParams::random(2, 4, 2, prng);
    params.cross.wv = Matrix::zeros(8, 8);
    const auto grid = GridSpec::make(2, 8, 4);
    const auto mask = build_block_mask(grid, MaskVariant::ours());
    Rng xrng(62);
    const auto x = TokenTensor::random(2, 8, 8, xrng);
    const auto zero_ctx = TokenTensor::zeros(2, 3, 8);

    const auto with_cross = mini_4d_block_forward(x, zero_ctx, params, mask);
    const auto without = mini_4d_block_forward(x, zero_ctx, params, mask, nullptr,
                                               MiniBlockToggles{.cross = false});
    double worst = 0.0;
    for (std::size_t i = 0; i < with_cross.data.size(); ++i) {
        worst = std::max(worst, std::abs(with_cross.data[i] - without.data[i]));
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("mini block: frame permutation equivariance without rope or anchor") {
    const int frames = 2, p_tokens = 8, d = 8;
    Rng prng(71);
    auto params = MiniBlockParams::random(2, 4, 2, prng);
    Rng wo_rng(72);
    params.temporal.wo = Matrix::random(d, d, wo_rng);  // make the temporal path active

    const auto grid = GridSpec::make(frames, p_tokens, 4);
    // |i-j| is permutation-symmetric for two frames, so the no-anchor mask is
    // itself invariant under the frame swap
    const auto mask = build_block_mask(grid, MaskVariant::no_anchor());

    Rng xrng(73);
    const auto x = TokenTensor::random(frames, p_tokens, d, xrng);
    Rng crng(74);
    const auto ctx = TokenTensor::random(frames, 3, d, crng);

    auto swap_frames = [&](const TokenTensor& t) {
        TokenTensor s = TokenTensor::zeros(t.frames, t.tokens_per_frame, t.channels);
        for (int f = 0; f < t.frames; ++f) {
            for (int p = 0; p < t.tokens_per_frame; ++p) {
                const auto src = t.token(static_cast<std::int64_t>(f) * t.tokens_per_frame + p);
                auto dst = s.token(static_cast<std::int64_t>(t.frames - 1 - f) * t.tokens_per_frame + p);
                std::copy(src.begin(), src.end(), dst.begin());
            }
        }
        return s;
    };

    const auto y = mini_4d_block_forward(x, ctx, params, mask);
    const auto y_swapped = mini_4d_block_forward(swap_frames(x), swap_frames(ctx), params, mask);
    const auto expect = swap_frames(y);
    double worst = 0.0;
    for (std::size_t i = 0; i < expect.data.size(); ++i) {
        worst = std::max(worst, std::abs(y_swapped.data[i] - expect.data[i]));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("anchor reachability via finite-difference probing") {
    const int frames = 3, p_tokens = 8, sb = 4, d = 8;
    const auto grid = GridSpec::make(frames, p_tokens, sb);
    const int nb = grid.blocks_per_frame();  // 2
    Rng prng(81);
    const auto params = AttentionParams::random(1, d, prng);
    Rng xrng(82);
    const auto x = TokenTensor::random(frames, p_tokens, d, xrng);

    auto probe = [&](const MaskVariant& variant, int perturb_token) {
        const auto mask = build_block_mask(grid, variant);
        const auto base = block_sparse_mha(x, params, mask);
        TokenTensor bumped = x;
        bumped.token(perturb_token)[0] += 1e-3;
        const auto moved = block_sparse_mha(bumped, params, mask);
        std::vector<double> delta(x.total_tokens(), 0.0);
        for (std::int64_t a = 0; a < x.total_tokens(); ++a) {
            for (int c = 0; c < d; ++c) {
                delta[a] = std::max(delta[a],
                                    std::abs(moved.token(a)[c] - base.token(a)[c]));
            }
        }
        return delta;
    };

    SECTION("anchored mask: a frame-0 perturbation reaches every token") {
        const auto delta = probe(MaskVariant::ours(), /*token in frame 0, block 1*/ 5);
        for (std::int64_t a = 0; a < grid.total_tokens(); ++a) {
            INFO("token " << a);
            CHECK(delta[a] > 0.0);
        }
    }
    SECTION("no-anchor mask: only stride-admissible blocks respond") {
        // perturb frame 0, spatial block u=1 (token 5)
        const auto delta = probe(MaskVariant::no_anchor(StrideSchedule::make({1, 2})), 5);
        for (int j = 1; j < frames; ++j) {
            const int s = StrideSchedule::make({1, 2}).at(j);
            for (int w = 0; w < nb; ++w) {
                const bool admissible = (w % s) == (1 % s);
                for (int t = 0; t < sb; ++t) {
                    const std::int64_t a = static_cast<std::int64_t>(j) * p_tokens + w * sb + t;
                    INFO("frame " << j << " block " << w << " token " << a);
                    if (admissible) {
                        CHECK(delta[a] > 0.0);
                    } else {
                        CHECK(delta[a] == 0.0);
                    }
                }
            }
        }
    }
    SECTION("temporal-only mask: only the matching block responds") {
        const auto delta = probe(MaskVariant::temporal_only(), 5);
        for (int j = 1; j < frames; ++j) {
            for (int w = 0; w < nb; ++w) {
                for (int t = 0; t < sb; ++t) {
                    const std::int64_t a = static_cast<std::int64_t>(j) * p_tokens + w * sb + t;
                    if (w == 1) {
                        CHECK(delta[a] > 0.0);
                    } else {
                        CHECK(delta[a] == 0.0);
                    }
                }
            }
        }
    }
}
