#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "strata/grid.hpp"
#include "strata/mask.hpp"
#include "strata/schedule.hpp"

namespace strata {

// 21-layer stack as stated: hidden 2048, 16 heads, 4096 spatial tokens per
// frame in blocks of 128, 1370 context tokens, 4x feed-forward, MoE on the
// final 6 layers (top-2 of 8), 10 concat-skip layers projecting 4096 -> 2048.
// One multiply-add counts as 2 FLOPs throughout; the convention cancels in
// every ratio.
struct ArchConfig {
    int num_layers = 21;
    int d_model = 2048;
    int heads = 16;
    int head_dim = 128;
    int tokens_per_frame = 4096;
    int block_size = 128;
    int context_len = 1370;
    int ffn_expansion = 4;
    int moe_layers = 6;
    int experts = 8;
    int top_k = 2;
    int skip_pairs = 10;
    // cost of a MoE feed-forward relative to the dense one; routing internals
    // are unspecified and cancel in ratios, so dense-equivalent is the default
    double moe_cost_factor = 1.0;

    void validate() const {
        if (num_layers < 1 || d_model < 1 || heads < 1 || head_dim < 1 || tokens_per_frame < 1 ||
            block_size < 1 || context_len < 0 || ffn_expansion < 1 || moe_layers < 0 ||
            skip_pairs < 0) {
            throw std::invalid_argument("ArchConfig: counts must be positive");
        }
        if (d_model != heads * head_dim) {
            throw std::invalid_argument("ArchConfig: d_model != heads * head_dim");
        }
        if (moe_layers > num_layers || skip_pairs > num_layers) {
            throw std::invalid_argument("ArchConfig: more MoE/skip layers than layers");
        }
    }
};

// Score and value matmuls of the temporal attention at the given block-pair
// density: density * 4 * (T*P)^2 * d_model. Projections are fixed costs and
// accounted separately.
inline double temporal_attention_flops(const GridSpec& grid, int d_model, double density_value) {
    if (!(density_value > 0.0 && density_value <= 1.0)) {
        throw std::invalid_argument("temporal_attention_flops: density must be in (0,1]");
    }
    const double n = static_cast<double>(grid.total_tokens());
    return density_value * 4.0 * n * n * static_cast<double>(d_model);
}

namespace detail {

struct FixedComponents {
    double temporal_qkvo = 0;
    double spatial_attn = 0;
    double cross_attn = 0;
    double ffn = 0;
    double skip_proj = 0;

    double total() const { return temporal_qkvo + spatial_attn + cross_attn + ffn + skip_proj; }
};

// Per-layer fixed costs, averaged across the stack (skip projections exist on
// skip_pairs of num_layers layers; MoE replaces the FFN on moe_layers).
inline FixedComponents fixed_components(const ArchConfig& arch, int frames) {
    arch.validate();
    if (frames < 1) throw std::invalid_argument("fixed_components: frames must be >= 1");
    const double t = frames;
    const double p = arch.tokens_per_frame;
    const double d = arch.d_model;
    const double l = arch.context_len;
    FixedComponents c;
    c.temporal_qkvo = 8.0 * t * p * d * d;
    c.spatial_attn = 4.0 * t * p * p * d + 8.0 * t * p * d * d;
    c.cross_attn = 4.0 * t * p * d * d + 4.0 * t * l * d * d + 4.0 * t * p * l * d;
    const double ffn_dense = 4.0 * arch.ffn_expansion * t * p * d * d;
    const double dense_layers = arch.num_layers - arch.moe_layers;
    c.ffn = ffn_dense * (dense_layers + arch.moe_cost_factor * arch.moe_layers) / arch.num_layers;
    c.skip_proj = 4.0 * t * p * d * d * static_cast<double>(arch.skip_pairs) / arch.num_layers;
    return c;
}

} // namespace detail

// Average per-layer fixed FLOPs (everything except the temporal score/value
// matmuls); exactly linear in the frame count.
inline double fixed_layer_flops(const ArchConfig& arch, int frames) {
    return detail::fixed_components(arch, frames).total();
}

// Calibration point for the fixed-to-attention cost ratio: the target total
// ratio observed at a reference frame count.
struct Calibration {
    double ratio_total = 0.0;
    int frames = 0;
};

// kappa = F/A solving ratio_total = (kappa + density)/(kappa + 1).
inline double solve_kappa(double ratio_total, double density_value) {
    if (!(ratio_total > density_value && ratio_total < 1.0)) {
        throw std::invalid_argument("solve_kappa: ratio_total must lie in (density, 1)");
    }
    return (ratio_total - density_value) / (1.0 - ratio_total);
}

struct CostReport {
    int frames = 0;
    double density = 0.0;
    // per-layer averages
    double temporal_attn_full = 0.0;
    double temporal_attn_sparse = 0.0;
    double temporal_qkvo = 0.0;
    double spatial_attn = 0.0;
    double cross_attn = 0.0;
    double ffn = 0.0;
    double skip_proj = 0.0;
    double fixed_per_layer = 0.0;
    // stack totals
    double total_sparse = 0.0;
    double total_full = 0.0;
    double ratio_attn = 0.0;
    double ratio_total = 0.0;
    std::optional<double> ratio_total_calibrated;
    std::optional<double> kappa_ref;
};

inline CostReport cost_report(const ArchConfig& arch, const GridSpec& grid,
                              const MaskVariant& variant,
                              std::optional<Calibration> calibration = std::nullopt) {
    arch.validate();
    if (grid.block_size != arch.block_size || grid.tokens_per_frame != arch.tokens_per_frame) {
        throw std::invalid_argument("cost_report: grid does not match the architecture token layout");
    }
    CostReport r;
    r.frames = grid.frames;
    r.density = density(build_block_mask(grid, variant));

    const auto fixed = detail::fixed_components(arch, grid.frames);
    r.temporal_attn_full = temporal_attention_flops(grid, arch.d_model, 1.0);
    r.temporal_attn_sparse = r.temporal_attn_full * r.density;
    r.temporal_qkvo = fixed.temporal_qkvo;
    r.spatial_attn = fixed.spatial_attn;
    r.cross_attn = fixed.cross_attn;
    r.ffn = fixed.ffn;
    r.skip_proj = fixed.skip_proj;
    r.fixed_per_layer = fixed.total();

    const double layers = arch.num_layers;
    r.total_sparse = layers * (r.fixed_per_layer + r.temporal_attn_sparse);
    r.total_full = layers * (r.fixed_per_layer + r.temporal_attn_full);
    r.ratio_attn = r.density;
    r.ratio_total = r.total_sparse / r.total_full;

    if (calibration) {
        GridSpec ref_grid = GridSpec::make(calibration->frames, grid.tokens_per_frame, grid.block_size);
        const double density_ref = density(build_block_mask(ref_grid, variant));
        const double kappa_ref = solve_kappa(calibration->ratio_total, density_ref);
        // fixed costs scale with T, attention with T^2, so kappa ~ 1/T
        const double kappa_t = kappa_ref * static_cast<double>(calibration->frames) / grid.frames;
        r.ratio_total_calibrated = (kappa_t + r.density) / (kappa_t + 1.0);
        r.kappa_ref = kappa_ref;
    }
    return r;
}

struct ScalingPoint {
    int frames = 0;
    double density = 0.0;
    double ratio_attn = 0.0;
    double ratio_total = 0.0;
    std::optional<double> ratio_total_calibrated;
};

inline std::vector<ScalingPoint> predict_scaling(const ArchConfig& arch, const MaskVariant& variant,
                                                 const std::vector<int>& frames_list,
                                                 std::optional<Calibration> calibration = std::nullopt) {
    if (frames_list.empty()) {
        throw std::invalid_argument("predict_scaling: empty frame list");
    }
    if (calibration) {
        bool found = false;
        for (int t : frames_list) found = found || t == calibration->frames;
        if (!found) {
            throw std::invalid_argument("predict_scaling: reference frame count not in the list");
        }
    }
    std::vector<ScalingPoint> out;
    out.reserve(frames_list.size());
    for (int t : frames_list) {
        GridSpec grid = GridSpec::make(t, arch.tokens_per_frame, arch.block_size);
        CostReport r = cost_report(arch, grid, variant, calibration);
        out.push_back(ScalingPoint{t, r.density, r.ratio_attn, r.ratio_total, r.ratio_total_calibrated});
    }
    return out;
}

} // namespace strata
