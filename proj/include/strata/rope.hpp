#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace strata {

// Rotary embedding table for the frame axis. Frequencies are computed for
// half the head dimension and expanded by interleave-and-duplicate: the
// adjacent pair (2m, 2m+1) shares frequency omega_m = base^(-2m/head_dim)
// and is rotated by angle t * omega_m at frame t. A worked 8-dim example
// lives in the README. Trig is evaluated in 32-bit float precision.
struct RopeTable {
    int head_dim = 0;
    double base = 10000.0;
    int max_frames = 0;
    // row-major [frame][m], m in [0, head_dim/2)
    std::vector<float> angle;
    std::vector<float> cos_v;
    std::vector<float> sin_v;

    int pairs() const { return head_dim / 2; }

    float angle_at(int frame, int m) const { return angle[static_cast<std::size_t>(frame) * pairs() + m]; }
    float cos_at(int frame, int m) const { return cos_v[static_cast<std::size_t>(frame) * pairs() + m]; }
    float sin_at(int frame, int m) const { return sin_v[static_cast<std::size_t>(frame) * pairs() + m]; }
};

inline RopeTable build_rope_table(int head_dim, double base, int max_frames) {
    if (head_dim < 2 || head_dim % 2 != 0) {
        throw std::invalid_argument("build_rope_table: head_dim must be even and >= 2, got " +
                                    std::to_string(head_dim));
    }
    if (base <= 0.0) {
        throw std::invalid_argument("build_rope_table: base must be positive");
    }
    if (max_frames < 1) {
        throw std::invalid_argument("build_rope_table: max_frames must be >= 1");
    }
    RopeTable table;
    table.head_dim = head_dim;
    table.base = base;
    table.max_frames = max_frames;
    const int half = head_dim / 2;
    table.angle.resize(static_cast<std::size_t>(max_frames) * half);
    table.cos_v.resize(table.angle.size());
    table.sin_v.resize(table.angle.size());
    for (int m = 0; m < half; ++m) {
        const double freq = std::pow(base, -2.0 * m / head_dim);
        for (int t = 0; t < max_frames; ++t) {
            const float a = static_cast<float>(t * freq);
            const std::size_t idx = static_cast<std::size_t>(t) * half + m;
            table.angle[idx] = a;
            table.cos_v[idx] = std::cos(a);
            table.sin_v[idx] = std::sin(a);
        }
    }
    return table;
}

// Rotates each (2m, 2m+1) pair of a head vector by the frame angle. The
// spatial position of the token within its frame plays no role.
inline void apply_temporal_rope(std::span<double> vec, int frame, const RopeTable& table) {
    if (static_cast<int>(vec.size()) != table.head_dim) {
        throw std::invalid_argument("apply_temporal_rope: vector length " +
                                    std::to_string(vec.size()) + " != head_dim " +
                                    std::to_string(table.head_dim));
    }
    if (frame < 0 || frame >= table.max_frames) {
        throw std::invalid_argument("apply_temporal_rope: frame " + std::to_string(frame) +
                                    " outside table range [0, " + std::to_string(table.max_frames) + ")");
    }
    const int half = table.pairs();
    for (int m = 0; m < half; ++m) {
        const double c = table.cos_at(frame, m);
        const double s = table.sin_at(frame, m);
        const double x0 = vec[2 * m];
        const double x1 = vec[2 * m + 1];
        vec[2 * m] = x0 * c - x1 * s;
        vec[2 * m + 1] = x0 * s + x1 * c;
    }
}

inline std::vector<double> rotated(std::span<const double> vec, int frame, const RopeTable& table) {
    std::vector<double> out(vec.begin(), vec.end());
    apply_temporal_rope(out, frame, table);
    return out;
}

// CSV dump (frame,m,angle,cos,sin) for debugging.
inline void dump_rope_table_csv(const RopeTable& table, std::ostream& out) {
    out << "frame,m,angle,cos,sin\n";
    char buf[128];
    for (int t = 0; t < table.max_frames; ++t) {
        for (int m = 0; m < table.pairs(); ++m) {
            std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,%.9g,%.9g\n", t, m,
                          static_cast<double>(table.angle_at(t, m)),
                          static_cast<double>(table.cos_at(t, m)),
                          static_cast<double>(table.sin_at(t, m)));
            out << buf;
        }
    }
}

} // namespace strata
