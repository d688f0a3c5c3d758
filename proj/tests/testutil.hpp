#pragma once

#include <cmath>
#include <map>

#include "strata/mesh.hpp"

namespace testutil {

// axis-aligned cube of half-extent h centered at c, outward winding
inline strata::TriangleMesh make_cube(strata::Vec3 c = {0, 0, 0}, double h = 0.5) {
    strata::TriangleMesh m;
    m.vertices = {
        {c.x - h, c.y - h, c.z - h}, {c.x + h, c.y - h, c.z - h},
        {c.x + h, c.y + h, c.z - h}, {c.x - h, c.y + h, c.z - h},
        {c.x - h, c.y - h, c.z + h}, {c.x + h, c.y - h, c.z + h},
        {c.x + h, c.y + h, c.z + h}, {c.x - h, c.y + h, c.z + h},
    };
    m.faces = {
        {0, 2, 1}, {0, 3, 2},  // bottom
        {4, 5, 6}, {4, 6, 7},  // top
        {0, 1, 5}, {0, 5, 4},  // front
        {2, 3, 7}, {2, 7, 6},  // back
        {0, 4, 7}, {0, 7, 3},  // left
        {1, 2, 6}, {1, 6, 5},  // right
    };
    return m;
}

// unit square in the XY plane split along the (1,0)-(0,1) diagonal
inline strata::TriangleMesh make_split_square() {
    strata::TriangleMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    m.faces = {{0, 1, 3}, {1, 2, 3}};
    return m;
}

// icosphere: icosahedron subdivided `levels` times, vertices on radius r
inline strata::TriangleMesh make_icosphere(int levels = 1, double r = 1.0,
                                           strata::Vec3 center = {0, 0, 0}) {
    using strata::Vec3;
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    strata::TriangleMesh m;
    m.vertices = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    m.faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
    };
    for (int level = 0; level < levels; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const Vec3 p = (m.vertices[a] + m.vertices[b]) / 2.0;
            m.vertices.push_back(p);
            const int idx = m.vertex_count() - 1;
            midpoint[key] = idx;
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        for (const auto& f : m.faces) {
            const int ab = mid(f[0], f[1]);
            const int bc = mid(f[1], f[2]);
            const int ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        m.faces = std::move(next);
    }
    for (auto& v : m.vertices) {
        v = v.normalized() * r + center;
    }
    return m;
}

} // namespace testutil
