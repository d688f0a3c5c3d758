#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "strata/mask.hpp"
#include "strata/rope.hpp"
#include "strata/tensor.hpp"

namespace strata {

inline constexpr double kRmsNormEps = 1e-6;
inline constexpr double kLayerNormEps = 1e-6;

// Reference paths are O(N^2) and exist for verification; refuse sequences
// beyond this unless the caller raises the cap.
inline constexpr std::int64_t kDefaultTokenCap = 4096;

struct AttentionParams {
    int heads = 0;
    int head_dim = 0;
    Matrix wq, wk, wv, wo;             // d_model x d_model, no biases
    std::vector<double> q_gain, k_gain; // length d_model, per-head slices of head_dim

    int d_model() const { return heads * head_dim; }
    double scale() const { return 1.0 / std::sqrt(static_cast<double>(head_dim)); }

    static AttentionParams random(int heads, int head_dim, Rng& rng) {
        const int d = heads * head_dim;
        AttentionParams p;
        p.heads = heads;
        p.head_dim = head_dim;
        p.wq = Matrix::random(d, d, rng);
        p.wk = Matrix::random(d, d, rng);
        p.wv = Matrix::random(d, d, rng);
        p.wo = Matrix::random(d, d, rng);
        p.q_gain.assign(d, 1.0);
        p.k_gain.assign(d, 1.0);
        for (auto& g : p.q_gain) g = 1.0 + 0.1 * rng.normal();
        for (auto& g : p.k_gain) g = 1.0 + 0.1 * rng.normal();
        return p;
    }
};

// Optional probe filled by the attention paths: softmax weight sum per
// (head, query token), laid out head-major.
struct AttentionTrace {
    int heads = 0;
    std::int64_t tokens = 0;
    std::vector<double> row_weight_sums;
};

namespace detail {

inline void rms_normalize(std::span<double> v, std::span<const double> gain) {
    double ss = 0.0;
    for (double x : v) ss += x * x;
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(v.size()) + kRmsNormEps);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = v[i] * inv * gain[i];
}

// Projects x through wq/wk/wv and prepares per-head normalized (and, for q/k,
// rotated) streams. Layout: [token][d_model] with heads in contiguous slices.
struct ProjectedStreams {
    std::int64_t tokens = 0;
    int d_model = 0;
    std::vector<double> q, k, v;
};

inline ProjectedStreams project_qkv(const TokenTensor& x, const AttentionParams& params,
                                    const RopeTable* rope) {
    const std::int64_t n = x.total_tokens();
    const int d = params.d_model();
    ProjectedStreams s;
    s.tokens = n;
    s.d_model = d;
    s.q.resize(static_cast<std::size_t>(n) * d);
    s.k.resize(static_cast<std::size_t>(n) * d);
    s.v.resize(static_cast<std::size_t>(n) * d);
    for (std::int64_t a = 0; a < n; ++a) {
        const auto xa = x.token(a);
        std::span<double> qa(s.q.data() + a * d, d);
        std::span<double> ka(s.k.data() + a * d, d);
        std::span<double> va(s.v.data() + a * d, d);
        vec_matmul(xa, params.wq, qa);
        vec_matmul(xa, params.wk, ka);
        vec_matmul(xa, params.wv, va);
        const int frame = x.frame_of(a);
        for (int h = 0; h < params.heads; ++h) {
            std::span<double> qh = qa.subspan(h * params.head_dim, params.head_dim);
            std::span<double> kh = ka.subspan(h * params.head_dim, params.head_dim);
            rms_normalize(qh, std::span<const double>(params.q_gain).subspan(h * params.head_dim, params.head_dim));
            rms_normalize(kh, std::span<const double>(params.k_gain).subspan(h * params.head_dim, params.head_dim));
            if (rope != nullptr) {
                apply_temporal_rope(qh, frame, *rope);
                apply_temporal_rope(kh, frame, *rope);
            }
        }
    }
    return s;
}

// Softmax-weighted value sum for one (head, query) over an explicit admissible
// key list, max-subtracted, keys visited in the order given (ascending).
inline void attend_row(const ProjectedStreams& s, const AttentionParams& params, int head,
                       std::int64_t a, std::span<const std::int64_t> keys,
                       std::span<double> out_head, double* weight_sum) {
    const int hd = params.head_dim;
    const int d = s.d_model;
    const double scale = params.scale();
    const double* qa = s.q.data() + a * d + head * hd;

    double max_score = -std::numeric_limits<double>::infinity();
    std::vector<double> scores(keys.size());
    for (std::size_t idx = 0; idx < keys.size(); ++idx) {
        const double* kb = s.k.data() + keys[idx] * d + head * hd;
        double dot = 0.0;
        for (int c = 0; c < hd; ++c) dot += qa[c] * kb[c];
        const double sc = scale * dot;
        scores[idx] = sc;
        if (sc > max_score) max_score = sc;
    }
    double denom = 0.0;
    for (auto& sc : scores) {
        sc = std::exp(sc - max_score);
        denom += sc;
    }
    for (int c = 0; c < hd; ++c) out_head[c] = 0.0;
    double wsum = 0.0;
    for (std::size_t idx = 0; idx < keys.size(); ++idx) {
        const double w = scores[idx] / denom;
        wsum += w;
        const double* vb = s.v.data() + keys[idx] * d + head * hd;
        for (int c = 0; c < hd; ++c) out_head[c] += w * vb[c];
    }
    if (weight_sum != nullptr) *weight_sum = wsum;
}

// Shared core: per query token, an admissible-key provider yields the key
// list; concatenated head outputs go through wo.
template <typename KeysFn>
inline TokenTensor mha_core(const TokenTensor& x, const AttentionParams& params,
                            const RopeTable* rope, KeysFn&& keys_for, AttentionTrace* trace) {
    const std::int64_t n = x.total_tokens();
    const int d = params.d_model();
    if (x.channels != d) {
        throw std::invalid_argument("attention: tensor channels " + std::to_string(x.channels) +
                                    " != d_model " + std::to_string(d));
    }
    const ProjectedStreams s = project_qkv(x, params, rope);
    if (trace != nullptr) {
        trace->heads = params.heads;
        trace->tokens = n;
        trace->row_weight_sums.assign(static_cast<std::size_t>(params.heads) * n, 0.0);
    }
    TokenTensor out = TokenTensor::zeros(x.frames, x.tokens_per_frame, x.channels);
    std::vector<double> concat(static_cast<std::size_t>(d));
    std::vector<std::int64_t> keys;
    for (std::int64_t a = 0; a < n; ++a) {
        keys.clear();
        keys_for(a, keys);
        if (keys.empty()) {
            throw std::invalid_argument("attention: query token " + std::to_string(a) +
                                        " has no admissible keys (corrupted mask)");
        }
        for (int h = 0; h < params.heads; ++h) {
            double* wsum = trace != nullptr
                               ? &trace->row_weight_sums[static_cast<std::size_t>(h) * n + a]
                               : nullptr;
            attend_row(s, params, h, a, keys,
                       std::span<double>(concat.data() + h * params.head_dim, params.head_dim), wsum);
        }
        vec_matmul(concat, params.wo, out.token(a));
    }
    return out;
}

inline void check_token_cap(std::int64_t tokens, std::int64_t cap) {
    if (tokens > cap) {
        throw std::invalid_argument("attention: " + std::to_string(tokens) +
                                    " tokens exceed the reference-path cap of " + std::to_string(cap));
    }
}

} // namespace detail

// Reference multi-head attention under a token-level mask (token_mask may be
// empty for full attention). Denied pairs are excluded before exponentiation.
inline TokenTensor dense_masked_mha(const TokenTensor& x, const AttentionParams& params,
                                    std::span<const std::uint8_t> token_mask,
                                    const RopeTable* rope = nullptr,
                                    AttentionTrace* trace = nullptr,
                                    std::int64_t token_cap = kDefaultTokenCap) {
    const std::int64_t n = x.total_tokens();
    detail::check_token_cap(n, token_cap);
    if (!token_mask.empty() && static_cast<std::int64_t>(token_mask.size()) != n * n) {
        throw std::invalid_argument("dense_masked_mha: mask has " + std::to_string(token_mask.size()) +
                                    " entries, expected " + std::to_string(n * n));
    }
    return detail::mha_core(
        x, params, rope,
        [&](std::int64_t a, std::vector<std::int64_t>& keys) {
            if (token_mask.empty()) {
                for (std::int64_t b = 0; b < n; ++b) keys.push_back(b);
            } else {
                const auto* row = token_mask.data() + a * n;
                for (std::int64_t b = 0; b < n; ++b) {
                    if (row[b]) keys.push_back(b);
                }
            }
        },
        trace);
}

// Block-sparse execution: keys/values are gathered per query block from
// admissible key blocks only; denied blocks are never materialized. Equals
// dense_masked_mha under expand_to_token_mask(mask).
inline TokenTensor block_sparse_mha(const TokenTensor& x, const AttentionParams& params,
                                    const BlockMask& mask, const RopeTable* rope = nullptr,
                                    AttentionTrace* trace = nullptr,
                                    std::int64_t token_cap = kDefaultTokenCap) {
    if (mask.grid.frames != x.frames || mask.grid.tokens_per_frame != x.tokens_per_frame) {
        throw std::invalid_argument("block_sparse_mha: mask grid does not match tensor shape");
    }
    const std::int64_t n = x.total_tokens();
    detail::check_token_cap(n, token_cap);
    const int sb = mask.grid.block_size;
    const int n_blk = mask.grid.total_blocks();

    // admissible key-token lists per query block, ascending
    std::vector<std::vector<std::int64_t>> gathered(static_cast<std::size_t>(n_blk));
    for (int qb = 0; qb < n_blk; ++qb) {
        auto& list = gathered[qb];
        const auto* bits = mask.bits.data() + static_cast<std::size_t>(qb) * n_blk;
        for (int kb = 0; kb < n_blk; ++kb) {
            if (!bits[kb]) continue;
            const std::int64_t base = static_cast<std::int64_t>(kb) * sb;
            for (int tkn = 0; tkn < sb; ++tkn) list.push_back(base + tkn);
        }
    }
    return detail::mha_core(
        x, params, rope,
        [&](std::int64_t a, std::vector<std::int64_t>& keys) {
            keys = gathered[static_cast<std::size_t>(a / sb)];
        },
        trace);
}

// ---------------------------------------------------------------------------
// Miniature 4D transformer block: per-frame spatial self-attention, per-frame
// cross-attention to a context sequence, temporal block-sparse attention with
// frame RoPE, and a feed-forward; all pre-norm residual.
// ---------------------------------------------------------------------------

struct LayerNormParams {
    std::vector<double> gain, bias;

    static LayerNormParams identity(int d) {
        return LayerNormParams{std::vector<double>(d, 1.0), std::vector<double>(d, 0.0)};
    }
    static LayerNormParams random(int d, Rng& rng) {
        LayerNormParams p = identity(d);
        for (auto& g : p.gain) g = 1.0 + 0.1 * rng.normal();
        for (auto& b : p.bias) b = 0.1 * rng.normal();
        return p;
    }
};

inline void layer_norm(std::span<const double> x, const LayerNormParams& p, std::span<double> out) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) * inv * p.gain[i] + p.bias[i];
}

struct FeedForwardParams {
    Matrix w_in;   // d -> expansion*d
    Matrix w_out;  // expansion*d -> d

    static FeedForwardParams random(int d, int expansion, Rng& rng) {
        return FeedForwardParams{Matrix::random(d, d * expansion, rng),
                                 Matrix::random(d * expansion, d, rng)};
    }
};

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

struct MiniBlockParams {
    AttentionParams spatial;
    AttentionParams cross;     // wk/wv act on context tokens
    AttentionParams temporal;  // wo starts at zero
    FeedForwardParams ffn;
    LayerNormParams ln_spatial, ln_cross, ln_temporal, ln_ffn;

    static MiniBlockParams random(int heads, int head_dim, int ffn_expansion, Rng& rng) {
        const int d = heads * head_dim;
        MiniBlockParams p;
        p.spatial = AttentionParams::random(heads, head_dim, rng);
        p.cross = AttentionParams::random(heads, head_dim, rng);
        p.temporal = AttentionParams::random(heads, head_dim, rng);
        p.temporal.wo = Matrix::zeros(d, d);  // new module starts transparent
        p.ffn = FeedForwardParams::random(d, ffn_expansion, rng);
        p.ln_spatial = LayerNormParams::random(d, rng);
        p.ln_cross = LayerNormParams::random(d, rng);
        p.ln_temporal = LayerNormParams::random(d, rng);
        p.ln_ffn = LayerNormParams::random(d, rng);
        return p;
    }
};

namespace detail {

inline TokenTensor layer_normed(const TokenTensor& x, const LayerNormParams& p) {
    TokenTensor out = TokenTensor::zeros(x.frames, x.tokens_per_frame, x.channels);
    for (std::int64_t a = 0; a < x.total_tokens(); ++a) layer_norm(x.token(a), p, out.token(a));
    return out;
}

inline TokenTensor frame_slice(const TokenTensor& x, int frame) {
    TokenTensor out = TokenTensor::zeros(1, x.tokens_per_frame, x.channels);
    const std::int64_t base = static_cast<std::int64_t>(frame) * x.tokens_per_frame;
    for (int p = 0; p < x.tokens_per_frame; ++p) {
        auto src = x.token(base + p);
        auto dst = out.token(p);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    return out;
}

// Cross-attention for one frame: queries from x tokens, keys/values from the
// frame's context tokens.
inline void cross_attention_frame(const TokenTensor& xn, int frame, const TokenTensor& ctxn,
                                  const AttentionParams& params, TokenTensor& residual) {
    const int d = params.d_model();
    const int hd = params.head_dim;
    const std::int64_t p_tokens = xn.tokens_per_frame;
    const std::int64_t l_tokens = ctxn.tokens_per_frame;
    const std::int64_t x_base = static_cast<std::int64_t>(frame) * p_tokens;
    const std::int64_t c_base = static_cast<std::int64_t>(frame) * l_tokens;

    std::vector<double> kk(static_cast<std::size_t>(l_tokens) * d);
    std::vector<double> vv(static_cast<std::size_t>(l_tokens) * d);
    for (std::int64_t b = 0; b < l_tokens; ++b) {
        std::span<double> kb(kk.data() + b * d, d);
        std::span<double> vb(vv.data() + b * d, d);
        vec_matmul(ctxn.token(c_base + b), params.wk, kb);
        vec_matmul(ctxn.token(c_base + b), params.wv, vb);
        for (int h = 0; h < params.heads; ++h) {
            rms_normalize(kb.subspan(h * hd, hd),
                          std::span<const double>(params.k_gain).subspan(h * hd, hd));
        }
    }
    std::vector<double> q(static_cast<std::size_t>(d));
    std::vector<double> concat(static_cast<std::size_t>(d));
    std::vector<double> proj(static_cast<std::size_t>(d));
    std::vector<double> scores(static_cast<std::size_t>(l_tokens));
    const double scale = params.scale();
    for (std::int64_t a = 0; a < p_tokens; ++a) {
        vec_matmul(xn.token(x_base + a), params.wq, q);
        for (int h = 0; h < params.heads; ++h) {
            std::span<double> qh(q.data() + h * hd, hd);
            rms_normalize(qh, std::span<const double>(params.q_gain).subspan(h * hd, hd));
            double max_score = -std::numeric_limits<double>::infinity();
            for (std::int64_t b = 0; b < l_tokens; ++b) {
                const double* kb = kk.data() + b * d + h * hd;
                double dot = 0.0;
                for (int c = 0; c < hd; ++c) dot += qh[c] * kb[c];
                scores[b] = scale * dot;
                max_score = std::max(max_score, scores[b]);
            }
            double denom = 0.0;
            for (std::int64_t b = 0; b < l_tokens; ++b) {
                scores[b] = std::exp(scores[b] - max_score);
                denom += scores[b];
            }
            double* oh = concat.data() + h * hd;
            for (int c = 0; c < hd; ++c) oh[c] = 0.0;
            for (std::int64_t b = 0; b < l_tokens; ++b) {
                const double w = scores[b] / denom;
                const double* vb = vv.data() + b * d + h * hd;
                for (int c = 0; c < hd; ++c) oh[c] += w * vb[c];
            }
        }
        vec_matmul(concat, params.wo, proj);
        auto res = residual.token(x_base + a);
        for (int c = 0; c < d; ++c) res[c] += proj[c];
    }
}

} // namespace detail

// Sub-module switches; dropping a sub-module removes its residual branch.
struct MiniBlockToggles {
    bool spatial = true;
    bool cross = true;
    bool temporal = true;
    bool ffn = true;
};

// Pre-norm residual 4D block. context holds per-frame conditioning tokens
// (frames x L_ctx x d_model).
inline TokenTensor mini_4d_block_forward(const TokenTensor& x, const TokenTensor& context,
                                         const MiniBlockParams& params, const BlockMask& mask,
                                         const RopeTable* rope = nullptr,
                                         MiniBlockToggles toggles = {},
                                         std::int64_t token_cap = kDefaultTokenCap) {
    if (context.frames != x.frames || context.channels != x.channels) {
        throw std::invalid_argument("mini_4d_block_forward: context shape mismatch");
    }
    if (mask.grid.frames != x.frames || mask.grid.tokens_per_frame != x.tokens_per_frame) {
        throw std::invalid_argument("mini_4d_block_forward: mask grid does not match tensor");
    }
    detail::check_token_cap(x.total_tokens(), token_cap);

    TokenTensor h = x;

    // spatial self-attention, each frame independently
    if (toggles.spatial) {
        TokenTensor hn = detail::layer_normed(h, params.ln_spatial);
        for (int f = 0; f < x.frames; ++f) {
            TokenTensor slice = detail::frame_slice(hn, f);
            TokenTensor attn = detail::mha_core(
                slice, params.spatial, nullptr,
                [&](std::int64_t, std::vector<std::int64_t>& keys) {
                    for (std::int64_t b = 0; b < slice.total_tokens(); ++b) keys.push_back(b);
                },
                nullptr);
            const std::int64_t base = static_cast<std::int64_t>(f) * x.tokens_per_frame;
            for (int p = 0; p < x.tokens_per_frame; ++p) {
                auto res = h.token(base + p);
                auto add = attn.token(p);
                for (int c = 0; c < x.channels; ++c) res[c] += add[c];
            }
        }
    }

    // cross-attention to the frame's context
    if (toggles.cross) {
        TokenTensor hn = detail::layer_normed(h, params.ln_cross);
        for (int f = 0; f < x.frames; ++f) {
            detail::cross_attention_frame(hn, f, context, params.cross, h);
        }
    }

    // temporal block-sparse attention across frames
    if (toggles.temporal) {
        TokenTensor hn = detail::layer_normed(h, params.ln_temporal);
        TokenTensor attn = block_sparse_mha(hn, params.temporal, mask, rope, nullptr, token_cap);
        for (std::int64_t a = 0; a < h.total_tokens(); ++a) {
            auto res = h.token(a);
            auto add = attn.token(a);
            for (int c = 0; c < h.channels; ++c) res[c] += add[c];
        }
    }

    // feed-forward
    if (toggles.ffn) {
        TokenTensor hn = detail::layer_normed(h, params.ln_ffn);
        std::vector<double> mid(static_cast<std::size_t>(params.ffn.w_in.cols));
        std::vector<double> out(static_cast<std::size_t>(params.ffn.w_out.cols));
        for (std::int64_t a = 0; a < h.total_tokens(); ++a) {
            vec_matmul(hn.token(a), params.ffn.w_in, mid);
            for (auto& v : mid) v = gelu(v);
            vec_matmul(mid, params.ffn.w_out, out);
            auto res = h.token(a);
            for (int c = 0; c < h.channels; ++c) res[c] += out[c];
        }
    }

    return h;
}

} // namespace strata
