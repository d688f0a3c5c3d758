#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "strata/kdtree.hpp"
#include "strata/mesh.hpp"
#include "strata/rng.hpp"
#include "strata/vec3.hpp"

namespace strata {

enum class SampleTag { Uniform, Sharp };

// A tracked surface point: face index and barycentric coordinates on the mesh
// it was sampled from, plus the evaluated position/normal.
struct SurfaceSample {
    int face = 0;
    double b0 = 0.0, b1 = 0.0, b2 = 0.0;
    Vec3 position;
    Vec3 normal;
    SampleTag tag = SampleTag::Uniform;
};

// Area-weighted face choice + uniform barycentric via the square-root trick.
inline std::vector<SurfaceSample> sample_uniform(const TriangleMesh& mesh, int n,
                                                 std::uint64_t seed) {
    if (mesh.face_count() == 0) {
        throw std::invalid_argument("sample_uniform: empty mesh");
    }
    if (n < 1) {
        throw std::invalid_argument("sample_uniform: n must be >= 1");
    }
    std::vector<double> cum(mesh.face_count());
    double total = 0.0;
    for (int f = 0; f < mesh.face_count(); ++f) {
        total += mesh.face_area(f);
        cum[f] = total;
    }
    if (total <= 0.0) {
        throw std::invalid_argument("sample_uniform: mesh has zero total area");
    }
    Rng rng(seed);
    std::vector<SurfaceSample> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double pick = rng.uniform() * total;
        const int f = static_cast<int>(std::lower_bound(cum.begin(), cum.end(), pick) - cum.begin());
        const double r1 = rng.uniform();
        const double r2 = rng.uniform();
        const double sq = std::sqrt(r1);
        SurfaceSample s;
        s.face = std::min(f, mesh.face_count() - 1);
        s.b0 = 1.0 - sq;
        s.b1 = sq * (1.0 - r2);
        s.b2 = sq * r2;
        s.position = mesh.face_vertex(s.face, 0) * s.b0 + mesh.face_vertex(s.face, 1) * s.b1 +
                     mesh.face_vertex(s.face, 2) * s.b2;
        s.normal = mesh.face_normal(s.face);
        s.tag = SampleTag::Uniform;
        out.push_back(s);
    }
    return out;
}

struct MeshEdge {
    int v0 = 0, v1 = 0;       // v0 < v1
    int face_a = -1;          // always valid
    int face_b = -1;          // -1 on boundary edges
};

// Edges whose adjacent face normals deviate by more than the threshold, plus
// all boundary edges. Edges shared by 3+ faces are treated as sharp.
inline std::vector<MeshEdge> detect_sharp_edges(const TriangleMesh& mesh,
                                                double dihedral_threshold_deg) {
    if (!(dihedral_threshold_deg > 0.0 && dihedral_threshold_deg < 180.0)) {
        throw std::invalid_argument("detect_sharp_edges: threshold must be in (0, 180) degrees");
    }
    std::map<std::pair<int, int>, std::vector<int>> edge_faces;
    for (int f = 0; f < mesh.face_count(); ++f) {
        const auto& tri = mesh.faces[f];
        for (int c = 0; c < 3; ++c) {
            int a = tri[c];
            int b = tri[(c + 1) % 3];
            if (a > b) std::swap(a, b);
            edge_faces[{a, b}].push_back(f);
        }
    }
    std::vector<MeshEdge> sharp;
    const double cos_threshold = std::cos(dihedral_threshold_deg * M_PI / 180.0);
    for (const auto& [edge, faces] : edge_faces) {
        MeshEdge e{edge.first, edge.second, faces[0], faces.size() > 1 ? faces[1] : -1};
        if (faces.size() == 1) {
            sharp.push_back(e);  // boundary
        } else if (faces.size() == 2) {
            const double c = mesh.face_normal(faces[0]).dot(mesh.face_normal(faces[1]));
            if (c < cos_threshold) sharp.push_back(e);
        } else {
            sharp.push_back(e);  // non-manifold, keep for inspection
        }
    }
    return sharp;
}

// Length-uniform samples along sharp edges, written as barycentric samples on
// the first adjacent face (the off-edge coordinate is 0). n == 0 is allowed.
inline std::vector<SurfaceSample> sample_sharp(const TriangleMesh& mesh,
                                               std::span<const MeshEdge> edges, int n,
                                               std::uint64_t seed) {
    if (n == 0) return {};
    if (n < 0) {
        throw std::invalid_argument("sample_sharp: n must be >= 0");
    }
    if (edges.empty()) {
        throw std::invalid_argument("sample_sharp: empty edge set");
    }
    std::vector<double> cum(edges.size());
    double total = 0.0;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        total += distance(mesh.vertices[edges[i].v0], mesh.vertices[edges[i].v1]);
        cum[i] = total;
    }
    if (total <= 0.0) {
        throw std::invalid_argument("sample_sharp: edges have zero total length");
    }
    Rng rng(seed);
    std::vector<SurfaceSample> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double pick = rng.uniform() * total;
        const std::size_t e =
            std::min<std::size_t>(std::lower_bound(cum.begin(), cum.end(), pick) - cum.begin(),
                                  edges.size() - 1);
        const MeshEdge& edge = edges[e];
        const double t = rng.uniform();

        SurfaceSample s;
        s.face = edge.face_a;
        double b[3] = {0.0, 0.0, 0.0};
        const auto& tri = mesh.faces[edge.face_a];
        for (int c = 0; c < 3; ++c) {
            if (tri[c] == edge.v0) b[c] = 1.0 - t;
            if (tri[c] == edge.v1) b[c] = t;
        }
        s.b0 = b[0];
        s.b1 = b[1];
        s.b2 = b[2];
        s.position = mesh.face_vertex(s.face, 0) * s.b0 + mesh.face_vertex(s.face, 1) * s.b1 +
                     mesh.face_vertex(s.face, 2) * s.b2;
        s.normal = mesh.face_normal(s.face);
        s.tag = SampleTag::Sharp;
        out.push_back(s);
    }
    return out;
}

// One frame of tracked points: same index = same tracked surface point.
struct TrackedFrame {
    std::vector<Vec3> positions;
    std::vector<Vec3> normals;
};

// Evaluates the rest-pose (face, barycentric) mapping on a deformed mesh with
// identical topology. Any face-list difference is the defined error.
inline TrackedFrame propagate(std::span<const SurfaceSample> samples, const TriangleMesh& rest,
                              const TriangleMesh& deformed) {
    if (!rest.same_topology(deformed)) {
        throw std::invalid_argument(
            "propagate: deformed mesh does not share the rest-pose topology");
    }
    TrackedFrame frame;
    frame.positions.reserve(samples.size());
    frame.normals.reserve(samples.size());
    for (const auto& s : samples) {
        if (s.face < 0 || s.face >= deformed.face_count()) {
            throw std::invalid_argument("propagate: sample face index out of range");
        }
        frame.positions.push_back(deformed.face_vertex(s.face, 0) * s.b0 +
                                  deformed.face_vertex(s.face, 1) * s.b1 +
                                  deformed.face_vertex(s.face, 2) * s.b2);
        frame.normals.push_back(deformed.face_normal(s.face));
    }
    return frame;
}

// Snaps points to the nearest face centroid of the watertight mesh (k-NN with
// k=1 over centroids) and adopts that face's surface position and normal.
inline std::vector<SurfaceSample> project_to_surface(std::span<const Vec3> points,
                                                     const TriangleMesh& watertight) {
    if (watertight.face_count() == 0) {
        throw std::invalid_argument("project_to_surface: empty mesh");
    }
    std::vector<Vec3> centroids(watertight.face_count());
    for (int f = 0; f < watertight.face_count(); ++f) centroids[f] = watertight.face_centroid(f);
    KdTree tree(centroids);
    std::vector<SurfaceSample> out;
    out.reserve(points.size());
    for (const Vec3& p : points) {
        const auto hit = tree.nearest(p);
        SurfaceSample s;
        s.face = hit.index;
        s.b0 = s.b1 = s.b2 = 1.0 / 3.0;
        s.position = centroids[hit.index];
        s.normal = watertight.face_normal(hit.index);
        s.tag = SampleTag::Uniform;
        out.push_back(s);
    }
    return out;
}

// Greedy max-min selection starting from an explicit first index. Ties keep
// the lowest index.
inline std::vector<int> farthest_point_sampling_from(std::span<const Vec3> points, int k,
                                                     int first) {
    const int n = static_cast<int>(points.size());
    if (k < 0 || k > n) {
        throw std::invalid_argument("farthest_point_sampling: k must be in [0, point count]");
    }
    if (k == 0) return {};
    if (first < 0 || first >= n) {
        throw std::invalid_argument("farthest_point_sampling: start index out of range");
    }
    std::vector<int> chosen;
    chosen.reserve(k);
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    int current = first;
    chosen.push_back(current);
    for (int round = 1; round < k; ++round) {
        int best = -1;
        double best_d2 = -1.0;
        for (int i = 0; i < n; ++i) {
            const double d2 = std::min(min_d2[i], distance2(points[i], points[current]));
            min_d2[i] = d2;
            if (d2 > best_d2) {
                best_d2 = d2;
                best = i;
            }
        }
        current = best;
        chosen.push_back(current);
    }
    return chosen;
}

// First index drawn uniformly from the seed, then greedy max-min.
inline std::vector<int> farthest_point_sampling(std::span<const Vec3> points, int k,
                                                std::uint64_t seed) {
    if (points.empty()) {
        throw std::invalid_argument("farthest_point_sampling: empty point set");
    }
    Rng rng(seed);
    const int first = static_cast<int>(rng.uniform_index(points.size()));
    return farthest_point_sampling_from(points, k, first);
}

// Per-frame tracked point arrays of identical length, plus the rest-pose
// provenance that makes index i the same surface point in every frame.
struct TrackedPointSequence {
    std::vector<SurfaceSample> provenance;
    std::vector<TrackedFrame> frames;
    std::vector<int> fps_indices;

    void validate() const {
        if (frames.empty()) {
            throw std::invalid_argument("TrackedPointSequence: no frames");
        }
        const std::size_t n = frames.front().positions.size();
        for (const auto& f : frames) {
            if (f.positions.size() != n || f.normals.size() != n) {
                throw std::invalid_argument("TrackedPointSequence: frames differ in length");
            }
        }
    }
};

struct NormalizedSequence {
    TrackedPointSequence sequence;
    Vec3 center;
    double scale = 1.0;
};

// One axis-aligned box over every frame's points; uniform scale by the
// longest axis so the whole animation sits inside [-1,1]^3 with the longest
// axis touching the faces.
inline NormalizedSequence normalize_sequence(const TrackedPointSequence& seq) {
    seq.validate();
    Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (const auto& f : seq.frames) {
        for (const auto& p : f.positions) {
            lo = Vec3{std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
            hi = Vec3{std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
        }
    }
    const Vec3 extent = hi - lo;
    const double longest = std::max({extent.x, extent.y, extent.z});
    if (longest <= 0.0) {
        throw std::invalid_argument("normalize_sequence: zero-extent bounding box");
    }
    NormalizedSequence out;
    out.center = (lo + hi) / 2.0;
    out.scale = 2.0 / longest;
    out.sequence = seq;
    for (auto& f : out.sequence.frames) {
        for (auto& p : f.positions) {
            p = (p - out.center) * out.scale;
        }
    }
    return out;
}

} // namespace strata
