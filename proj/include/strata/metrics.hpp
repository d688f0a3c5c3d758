#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "strata/kdtree.hpp"
#include "strata/mesh.hpp"
#include "strata/rng.hpp"
#include "strata/vec3.hpp"

namespace strata {

// Symmetric Chamfer distance: 0.5 * (mean nearest distance a->b + b->a).
// Plain L2 by default; squared-L2 mode matches the other common convention.
inline double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b,
                               bool squared = false) {
    if (a.empty() || b.empty()) {
        throw std::invalid_argument("chamfer_distance: empty point cloud");
    }
    KdTree tree_a(a);
    KdTree tree_b(b);
    double sum_ab = 0.0;
    for (const auto& p : a) {
        const double d2 = tree_b.nearest(p).dist2;
        sum_ab += squared ? d2 : std::sqrt(d2);
    }
    double sum_ba = 0.0;
    for (const auto& p : b) {
        const double d2 = tree_a.nearest(p).dist2;
        sum_ba += squared ? d2 : std::sqrt(d2);
    }
    return 0.5 * (sum_ab / static_cast<double>(a.size()) + sum_ba / static_cast<double>(b.size()));
}

// F = 2PR/(P+R) with precision = |a within tau of b| / |a| and recall the
// mirror; 0 when both are 0.
inline double f_score(std::span<const Vec3> a, std::span<const Vec3> b, double tau) {
    if (a.empty() || b.empty()) {
        throw std::invalid_argument("f_score: empty point cloud");
    }
    if (!(tau > 0.0)) {
        throw std::invalid_argument("f_score: tau must be positive");
    }
    KdTree tree_a(a);
    KdTree tree_b(b);
    std::size_t hits_a = 0;
    for (const auto& p : a) {
        if (tree_b.any_within(p, tau)) ++hits_a;
    }
    std::size_t hits_b = 0;
    for (const auto& p : b) {
        if (tree_a.any_within(p, tau)) ++hits_b;
    }
    const double precision = static_cast<double>(hits_a) / static_cast<double>(a.size());
    const double recall = static_cast<double>(hits_b) / static_cast<double>(b.size());
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

// Occupancy over the fixed [-1,1]^3 bounds at R voxels per axis.
struct VoxelGrid {
    int res = 0;
    std::vector<std::uint8_t> occ;  // [ix][iy][iz] row-major, x slowest

    bool at(int ix, int iy, int iz) const {
        return occ[(static_cast<std::size_t>(ix) * res + iy) * res + iz] != 0;
    }
    std::int64_t count() const {
        std::int64_t c = 0;
        for (auto v : occ) c += v;
        return c;
    }
};

namespace detail {

// Crossings of the +x line through (y, z) with mesh triangles. Returns false
// when a crossing is too close to call (edge graze or near-parallel face),
// in which case the caller jitters the line and retries.
inline bool line_crossings_x(const TriangleMesh& mesh, double y, double z,
                             std::vector<double>& xs) {
    xs.clear();
    constexpr double kEps = 1e-12;
    for (int f = 0; f < mesh.face_count(); ++f) {
        const Vec3 a = mesh.face_vertex(f, 0);
        const Vec3 b = mesh.face_vertex(f, 1);
        const Vec3 c = mesh.face_vertex(f, 2);
        // 2D edge functions in the (y, z) projection
        const double e0 = (b.y - a.y) * (z - a.z) - (b.z - a.z) * (y - a.y);
        const double e1 = (c.y - b.y) * (z - b.z) - (c.z - b.z) * (y - b.y);
        const double e2 = (a.y - c.y) * (z - c.z) - (a.z - c.z) * (y - c.y);
        const double area2 = (b.y - a.y) * (c.z - a.z) - (b.z - a.z) * (c.y - a.y);
        const double scale = std::abs(area2);
        if (scale < kEps) {
            // face is edge-on to the line; it contributes no parity unless
            // the line grazes its projected segment, which the jittered
            // retry then decides
            const auto seg_dist2 = [&](const Vec3& p, const Vec3& q) {
                const double dy = q.y - p.y, dz = q.z - p.z;
                const double len2 = dy * dy + dz * dz;
                double t = len2 > 0.0 ? ((y - p.y) * dy + (z - p.z) * dz) / len2 : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                const double ry = p.y + t * dy - y, rz = p.z + t * dz - z;
                return ry * ry + rz * rz;
            };
            const double d2 = std::min({seg_dist2(a, b), seg_dist2(b, c), seg_dist2(c, a)});
            if (d2 < 1e-18) {
                return false;
            }
            continue;
        }
        const bool pos = e0 >= 0 && e1 >= 0 && e2 >= 0;
        const bool neg = e0 <= 0 && e1 <= 0 && e2 <= 0;
        if (!pos && !neg) continue;
        const double tol = 1e-10 * scale;
        if (std::abs(e0) < tol || std::abs(e1) < tol || std::abs(e2) < tol) {
            return false;  // on or nearly on an edge: ambiguous parity
        }
        // plane n . (p - a) = 0 solved for x along the line
        const Vec3 n = (b - a).cross(c - a);
        if (std::abs(n.x) < 1e-12 * n.norm()) {
            return false;  // face nearly parallel to the line yet 2D-inside
        }
        const double x = a.x - (n.y * (y - a.y) + n.z * (z - a.z)) / n.x;
        xs.push_back(x);
    }
    std::sort(xs.begin(), xs.end());
    return true;
}

} // namespace detail

// Voxel-center occupancy by ray-crossing parity. One line per (y, z) row of
// centers classifies all R centers along x; degenerate rows fall back to
// jittered lines.
inline VoxelGrid voxelize(const TriangleMesh& mesh, int res) {
    if (res < 1) {
        throw std::invalid_argument("voxelize: resolution must be >= 1");
    }
    VoxelGrid grid;
    grid.res = res;
    grid.occ.assign(static_cast<std::size_t>(res) * res * res, 0);
    const double pitch = 2.0 / res;
    std::vector<double> xs;
    Rng jitter_rng(0x5e3d1u);
    for (int iy = 0; iy < res; ++iy) {
        for (int iz = 0; iz < res; ++iz) {
            double y = -1.0 + (iy + 0.5) * pitch;
            double z = -1.0 + (iz + 0.5) * pitch;
            bool clean = detail::line_crossings_x(mesh, y, z, xs);
            for (int attempt = 0; attempt < 16 && !clean; ++attempt) {
                const double jy = y + (jitter_rng.uniform() - 0.5) * 1e-6 * pitch;
                const double jz = z + (jitter_rng.uniform() - 0.5) * 1e-6 * pitch;
                clean = detail::line_crossings_x(mesh, jy, jz, xs);
            }
            if (!clean) {
                throw std::runtime_error("voxelize: could not resolve ray parity for a row");
            }
            for (int ix = 0; ix < res; ++ix) {
                const double cx = -1.0 + (ix + 0.5) * pitch;
                const std::size_t below =
                    std::lower_bound(xs.begin(), xs.end(), cx) - xs.begin();
                if (below % 2 == 1) {
                    grid.occ[(static_cast<std::size_t>(ix) * res + iy) * res + iz] = 1;
                }
            }
        }
    }
    return grid;
}

// Volumetric overlap of two watertight meshes on occupancy grids over
// [-1,1]^3.
inline double voxel_iou(const TriangleMesh& a, const TriangleMesh& b, int res) {
    if (res < 8) {
        throw std::invalid_argument("voxel_iou: resolution must be >= 8");
    }
    for (const TriangleMesh* m : {&a, &b}) {
        const auto rep = check_watertight(*m);
        if (!rep.watertight) {
            throw std::invalid_argument("voxel_iou: mesh is not watertight (" +
                                        std::to_string(rep.boundary_edges) + " boundary edges, " +
                                        std::to_string(rep.non_manifold_edges) +
                                        " non-manifold edges)");
        }
    }
    const VoxelGrid ga = voxelize(a, res);
    const VoxelGrid gb = voxelize(b, res);
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < ga.occ.size(); ++i) {
        const bool va = ga.occ[i] != 0;
        const bool vb = gb.occ[i] != 0;
        inter += (va && vb) ? 1 : 0;
        uni += (va || vb) ? 1 : 0;
    }
    if (uni == 0) {
        throw std::invalid_argument("voxel_iou: both occupancy grids are empty (zero union)");
    }
    return static_cast<double>(inter) / static_cast<double>(uni);
}

} // namespace strata
