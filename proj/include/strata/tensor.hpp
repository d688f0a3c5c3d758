#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "strata/rng.hpp"

namespace strata {

// Row-major dense matrix, double precision.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    static Matrix zeros(int rows, int cols) {
        return Matrix{rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols, 0.0)};
    }

    // Gaussian entries scaled by 1/sqrt(cols) so products stay O(1).
    static Matrix random(int rows, int cols, Rng& rng) {
        Matrix m = zeros(rows, cols);
        const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
        for (auto& v : m.a) v = rng.normal() * scale;
        return m;
    }

    double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
    const double* row(int r) const { return a.data() + static_cast<std::size_t>(r) * cols; }
};

// y[c] = sum_k x[k] * w[k][c]
inline void vec_matmul(std::span<const double> x, const Matrix& w, std::span<double> y) {
    for (int c = 0; c < w.cols; ++c) y[c] = 0.0;
    for (int k = 0; k < w.rows; ++k) {
        const double xv = x[k];
        if (xv == 0.0) continue;
        const double* wr = w.row(k);
        for (int c = 0; c < w.cols; ++c) y[c] += xv * wr[c];
    }
}

// (frames, tokens_per_frame, channels) activation array, flat row-major.
struct TokenTensor {
    int frames = 0;
    int tokens_per_frame = 0;
    int channels = 0;
    std::vector<double> data;

    static TokenTensor zeros(int frames, int tokens_per_frame, int channels) {
        TokenTensor t{frames, tokens_per_frame, channels, {}};
        t.data.assign(static_cast<std::size_t>(frames) * tokens_per_frame * channels, 0.0);
        return t;
    }

    static TokenTensor random(int frames, int tokens_per_frame, int channels, Rng& rng) {
        TokenTensor t = zeros(frames, tokens_per_frame, channels);
        for (auto& v : t.data) v = rng.normal();
        return t;
    }

    std::int64_t total_tokens() const {
        return static_cast<std::int64_t>(frames) * tokens_per_frame;
    }

    // global token index = t * tokens_per_frame + p
    std::span<double> token(std::int64_t global) {
        return {data.data() + static_cast<std::size_t>(global) * channels,
                static_cast<std::size_t>(channels)};
    }
    std::span<const double> token(std::int64_t global) const {
        return {data.data() + static_cast<std::size_t>(global) * channels,
                static_cast<std::size_t>(channels)};
    }

    int frame_of(std::int64_t global) const {
        return static_cast<int>(global / tokens_per_frame);
    }

    bool same_shape(const TokenTensor& o) const {
        return frames == o.frames && tokens_per_frame == o.tokens_per_frame && channels == o.channels;
    }
};

} // namespace strata
