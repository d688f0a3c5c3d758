#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace strata {

// Token layout of a frame sequence: T frames of P tokens each, tiled into
// contiguous spatial blocks of S_B tokens. P must be a multiple of S_B.
struct GridSpec {
    int frames = 0;            // T
    int tokens_per_frame = 0;  // P
    int block_size = 0;        // S_B

    static GridSpec make(int frames, int tokens_per_frame, int block_size) {
        if (frames < 1) {
            throw std::invalid_argument("GridSpec: frames must be >= 1, got " + std::to_string(frames));
        }
        if (tokens_per_frame < 1 || block_size < 1) {
            throw std::invalid_argument("GridSpec: tokens_per_frame and block_size must be >= 1");
        }
        if (tokens_per_frame % block_size != 0) {
            throw std::invalid_argument(
                "GridSpec: tokens_per_frame (" + std::to_string(tokens_per_frame) +
                ") is not a multiple of block_size (" + std::to_string(block_size) + ")");
        }
        return GridSpec{frames, tokens_per_frame, block_size};
    }

    int blocks_per_frame() const { return tokens_per_frame / block_size; }  // N_B
    int total_blocks() const { return frames * blocks_per_frame(); }
    std::int64_t total_tokens() const {
        return static_cast<std::int64_t>(frames) * tokens_per_frame;
    }

    bool operator==(const GridSpec&) const = default;
};

} // namespace strata
