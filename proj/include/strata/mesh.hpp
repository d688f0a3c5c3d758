#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "strata/vec3.hpp"

namespace strata {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }

    Vec3 face_vertex(int f, int corner) const { return vertices[faces[f][corner]]; }

    Vec3 face_normal(int f) const {
        const Vec3 a = face_vertex(f, 0);
        const Vec3 b = face_vertex(f, 1);
        const Vec3 c = face_vertex(f, 2);
        return (b - a).cross(c - a).normalized();
    }

    double face_area(int f) const {
        const Vec3 a = face_vertex(f, 0);
        const Vec3 b = face_vertex(f, 1);
        const Vec3 c = face_vertex(f, 2);
        return 0.5 * (b - a).cross(c - a).norm();
    }

    Vec3 face_centroid(int f) const {
        return (face_vertex(f, 0) + face_vertex(f, 1) + face_vertex(f, 2)) / 3.0;
    }

    double total_area() const {
        double s = 0.0;
        for (int f = 0; f < face_count(); ++f) s += face_area(f);
        return s;
    }

    bool same_topology(const TriangleMesh& o) const {
        return faces == o.faces && vertex_count() == o.vertex_count();
    }

    void validate() const {
        for (std::size_t f = 0; f < faces.size(); ++f) {
            const auto& tri = faces[f];
            for (int c = 0; c < 3; ++c) {
                if (tri[c] < 0 || tri[c] >= vertex_count()) {
                    throw std::invalid_argument("mesh: face " + std::to_string(f) +
                                                " references vertex " + std::to_string(tri[c]) +
                                                " outside [0, " + std::to_string(vertex_count()) + ")");
                }
            }
            if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
                throw std::invalid_argument("mesh: face " + std::to_string(f) +
                                            " is degenerate (repeated vertex index)");
            }
        }
    }
};

struct WatertightReport {
    bool watertight = false;
    int boundary_edges = 0;      // edges used by exactly one face
    int non_manifold_edges = 0;  // edges used by three or more faces
};

// Closed 2-manifold check at the edge level: every undirected edge must be
// shared by exactly two faces.
inline WatertightReport check_watertight(const TriangleMesh& mesh) {
    std::map<std::pair<int, int>, int> edge_use;
    for (const auto& tri : mesh.faces) {
        for (int c = 0; c < 3; ++c) {
            int a = tri[c];
            int b = tri[(c + 1) % 3];
            if (a > b) std::swap(a, b);
            ++edge_use[{a, b}];
        }
    }
    WatertightReport rep;
    for (const auto& [edge, uses] : edge_use) {
        if (uses == 1) ++rep.boundary_edges;
        if (uses >= 3) ++rep.non_manifold_edges;
    }
    rep.watertight = rep.boundary_edges == 0 && rep.non_manifold_edges == 0;
    return rep;
}

// OBJ loader: v and f records, triangles only. Attribute references
// (f 1/2/3) keep the vertex index; quads and larger polygons are rejected.
inline TriangleMesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_obj: cannot open '" + path + "'");
    }
    TriangleMesh mesh;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ss >> v.x >> v.y >> v.z)) {
                throw std::runtime_error("load_obj: bad vertex at " + path + ":" +
                                         std::to_string(line_no));
            }
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string corner;
            while (ss >> corner) {
                const std::string head = corner.substr(0, corner.find('/'));
                int v = 0;
                try {
                    v = std::stoi(head);
                } catch (const std::exception&) {
                    throw std::runtime_error("load_obj: bad face corner '" + corner + "' at " +
                                             path + ":" + std::to_string(line_no));
                }
                if (v < 0) {
                    throw std::runtime_error("load_obj: negative (relative) indices unsupported at " +
                                             path + ":" + std::to_string(line_no));
                }
                idx.push_back(v - 1);  // OBJ is 1-based
            }
            if (idx.size() != 3) {
                throw std::runtime_error("load_obj: face with " + std::to_string(idx.size()) +
                                         " corners at " + path + ":" + std::to_string(line_no) +
                                         "; only triangles are supported");
            }
            mesh.faces.push_back({idx[0], idx[1], idx[2]});
        }
        // vn/vt/usemtl/etc. ignored
    }
    mesh.validate();
    return mesh;
}

inline void save_obj(const TriangleMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_obj: cannot open '" + path + "'");
    }
    char buf[128];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
        out << buf;
    }
    for (const auto& f : mesh.faces) {
        out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
    }
}

} // namespace strata
