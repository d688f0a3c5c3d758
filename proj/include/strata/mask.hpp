#pragma once

#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "strata/grid.hpp"
#include "strata/schedule.hpp"

namespace strata {

// Block-pair admissibility matrix. Row q is the query block, column k the key
// block; q = i*N_B + u and k = j*N_B + v decompose into (frame, spatial
// block). Entries are kept as int32 (0/1), row-major.
struct BlockMask {
    GridSpec grid;
    std::vector<std::int32_t> bits;

    std::int32_t at(int q, int k) const {
        return bits[static_cast<std::size_t>(q) * grid.total_blocks() + k];
    }

    std::int64_t ones_count() const {
        return std::accumulate(bits.begin(), bits.end(), std::int64_t{0});
    }
};

// Admissibility of a single block pair under a variant. q/k are decomposed
// as (frame i, block u) and (frame j, block v).
inline bool block_pair_admissible(const MaskVariant& variant, int i, int u, int j, int v) {
    using Kind = MaskVariant::Kind;
    switch (variant.kind) {
        case Kind::FullAttention:
            return true;
        case Kind::TemporalOnly:
            return u == v;
        default: {
            if (variant.anchored() && j == 0) return true;
            const int s = variant.stride_at(i >= j ? i - j : j - i);
            return (u % s) == (v % s);
        }
    }
}

inline BlockMask build_block_mask(const GridSpec& grid, const MaskVariant& variant) {
    if (grid.blocks_per_frame() < 1) {
        throw std::invalid_argument("build_block_mask: grid has no blocks per frame");
    }
    const int nb = grid.blocks_per_frame();
    const int n = grid.total_blocks();
    BlockMask mask{grid, std::vector<std::int32_t>(static_cast<std::size_t>(n) * n, 0)};
    for (int q = 0; q < n; ++q) {
        const int i = q / nb;
        const int u = q % nb;
        auto* row = mask.bits.data() + static_cast<std::size_t>(q) * n;
        for (int k = 0; k < n; ++k) {
            const int j = k / nb;
            const int v = k % nb;
            row[k] = block_pair_admissible(variant, i, u, j, v) ? 1 : 0;
        }
    }
    return mask;
}

// Fraction of admissible block pairs; equals the sparse/full FLOPs ratio of
// the attention score and value matmuls.
inline double density(const BlockMask& mask) {
    const double total = static_cast<double>(mask.grid.total_blocks()) * mask.grid.total_blocks();
    return static_cast<double>(mask.ones_count()) / total;
}

// Ones fraction within the (query frame i, key frame j) sub-block.
inline double frame_pair_density(const BlockMask& mask, int i, int j) {
    const int t = mask.grid.frames;
    if (i < 0 || i >= t || j < 0 || j >= t) {
        throw std::invalid_argument("frame_pair_density: frame index out of range");
    }
    const int nb = mask.grid.blocks_per_frame();
    std::int64_t ones = 0;
    for (int u = 0; u < nb; ++u) {
        for (int v = 0; v < nb; ++v) {
            ones += mask.at(i * nb + u, j * nb + v);
        }
    }
    return static_cast<double>(ones) / (static_cast<double>(nb) * nb);
}

inline constexpr std::int64_t kDefaultTokenMaskBudget = std::int64_t{1} << 24;

// Expands block admissibility to token granularity (total_tokens^2 entries,
// 0/1 uint8, row-major). Guarded by an entry budget since this exists for the
// desk-scale reference engine only.
inline std::vector<std::uint8_t> expand_to_token_mask(
    const BlockMask& mask, std::int64_t budget_entries = kDefaultTokenMaskBudget) {
    const std::int64_t n_tok = mask.grid.total_tokens();
    if (n_tok * n_tok > budget_entries) {
        throw std::invalid_argument("expand_to_token_mask: " + std::to_string(n_tok * n_tok) +
                                    " entries exceed budget of " + std::to_string(budget_entries));
    }
    const int sb = mask.grid.block_size;
    const int n_blk = mask.grid.total_blocks();
    std::vector<std::uint8_t> out(static_cast<std::size_t>(n_tok) * n_tok, 0);
    for (std::int64_t a = 0; a < n_tok; ++a) {
        const int qb = static_cast<int>(a / sb);
        auto* row = out.data() + static_cast<std::size_t>(a) * n_tok;
        const auto* bits = mask.bits.data() + static_cast<std::size_t>(qb) * n_blk;
        for (std::int64_t b = 0; b < n_tok; ++b) {
            row[b] = bits[b / sb] ? 1 : 0;
        }
    }
    return out;
}

// Writes the mask as a binary PGM (P5, maxval 255): one pixel per block pair,
// 255 = allowed, 0 = denied, query blocks top to bottom.
inline void render_mask(const BlockMask& mask, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("render_mask: cannot open '" + path + "' for writing");
    }
    const int n = mask.grid.total_blocks();
    out << "P5\n" << n << " " << n << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(n));
    for (int q = 0; q < n; ++q) {
        for (int k = 0; k < n; ++k) {
            row[k] = mask.at(q, k) ? 255 : 0;
        }
        out.write(reinterpret_cast<const char*>(row.data()), n);
    }
    if (!out) {
        throw std::runtime_error("render_mask: write failed for '" + path + "'");
    }
}

} // namespace strata
