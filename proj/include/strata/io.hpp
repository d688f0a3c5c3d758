#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "strata/vec3.hpp"

namespace strata {

using json = nlohmann::json;

// All floating output goes through 9 significant digits so reports are
// byte-stable across runs.
inline std::string format_sig9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

// Rounds through the 9-digit decimal so json dumps print exactly that form.
inline double sig9(double v) { return std::stod(format_sig9(v)); }

// Binary point cloud: little-endian float32, 6 fields per point
// (x y z nx ny nz), no header; the sidecar JSON carries the layout.
inline void write_point_cloud_bin(const std::string& path, std::span<const Vec3> positions,
                                  std::span<const Vec3> normals) {
    if (!normals.empty() && normals.size() != positions.size()) {
        throw std::invalid_argument("write_point_cloud_bin: normals/positions length mismatch");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("write_point_cloud_bin: cannot open '" + path + "'");
    }
    auto put = [&](double v) {
        const float f = static_cast<float>(v);
        out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    };
    for (std::size_t i = 0; i < positions.size(); ++i) {
        put(positions[i].x);
        put(positions[i].y);
        put(positions[i].z);
        const Vec3 n = normals.empty() ? Vec3{0, 0, 0} : normals[i];
        put(n.x);
        put(n.y);
        put(n.z);
    }
    if (!out) {
        throw std::runtime_error("write_point_cloud_bin: write failed for '" + path + "'");
    }
}

inline std::vector<Vec3> read_point_cloud_bin(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("read_point_cloud_bin: cannot open '" + path + "'");
    }
    in.seekg(0, std::ios::end);
    const std::streamoff bytes = in.tellg();
    in.seekg(0);
    constexpr std::streamoff stride = 6 * sizeof(float);
    if (bytes % stride != 0) {
        throw std::runtime_error("read_point_cloud_bin: '" + path +
                                 "' is not a whole number of 6-float records");
    }
    const std::size_t n = static_cast<std::size_t>(bytes / stride);
    std::vector<Vec3> pts(n);
    for (std::size_t i = 0; i < n; ++i) {
        float rec[6];
        in.read(reinterpret_cast<char*>(rec), sizeof(rec));
        pts[i] = Vec3{rec[0], rec[1], rec[2]};
    }
    if (!in) {
        throw std::runtime_error("read_point_cloud_bin: short read in '" + path + "'");
    }
    return pts;
}

// Text XYZ: one point per line, first three columns are the position.
inline std::vector<Vec3> read_xyz_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("read_xyz_text: cannot open '" + path + "'");
    }
    std::vector<Vec3> pts;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        Vec3 p;
        if (!(ss >> p.x >> p.y >> p.z)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            throw std::runtime_error("read_xyz_text: bad line " + std::to_string(line_no) + " in '" +
                                     path + "'");
        }
        pts.push_back(p);
    }
    return pts;
}

inline std::vector<Vec3> read_point_cloud(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".bin") {
        return read_point_cloud_bin(path);
    }
    return read_xyz_text(path);
}

// Mesh sequence manifest: {"rest": path, "frames": [{"deformed": p,
// "watertight": p}, ...]}; relative paths resolve against the manifest.
struct SequenceManifest {
    struct Frame {
        std::string deformed;
        std::string watertight;
    };
    std::string rest;
    std::vector<Frame> frames;
};

inline SequenceManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_manifest: cannot open '" + path + "'");
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("load_manifest: '" + path + "' is not valid JSON: " + e.what());
    }
    const auto base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };
    SequenceManifest m;
    if (!doc.contains("rest") || !doc.contains("frames") || !doc["frames"].is_array()) {
        throw std::runtime_error("load_manifest: expected {rest, frames:[...]} in '" + path + "'");
    }
    m.rest = resolve(doc["rest"].get<std::string>());
    for (const auto& f : doc["frames"]) {
        if (!f.contains("deformed") || !f.contains("watertight")) {
            throw std::runtime_error("load_manifest: frame entries need deformed and watertight");
        }
        m.frames.push_back({resolve(f["deformed"].get<std::string>()),
                            resolve(f["watertight"].get<std::string>())});
    }
    if (m.frames.empty()) {
        throw std::runtime_error("load_manifest: no frames in '" + path + "'");
    }
    return m;
}

} // namespace strata
