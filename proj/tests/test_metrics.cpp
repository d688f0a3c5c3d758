#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "strata/metrics.hpp"
#include "strata/rng.hpp"
#include "testutil.hpp"

using namespace strata;

namespace {

// rotation by angle about a unit axis (Rodrigues), plus translation
struct RigidTransform {
    Vec3 axis;
    double angle = 0.0;
    Vec3 shift;

    Vec3 operator()(const Vec3& p) const {
        const Vec3 k = axis.normalized();
        const double c = std::cos(angle), s = std::sin(angle);
        const Vec3 rotated = p * c + k.cross(p) * s + k * (k.dot(p) * (1.0 - c));
        return rotated + shift;
    }
};

std::vector<Vec3> moved(const RigidTransform& rt, std::span<const Vec3> pts) {
    std::vector<Vec3> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(rt(p));
    return out;
}

TriangleMesh moved(const RigidTransform& rt, const TriangleMesh& mesh) {
    TriangleMesh out = mesh;
    for (auto& v : out.vertices) v = rt(v);
    return out;
}

std::vector<Vec3> random_cloud(int n, std::uint64_t seed, double spread = 0.5) {
    Rng rng(seed);
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = Vec3{rng.normal() * spread, rng.normal() * spread, rng.normal() * spread};
    return pts;
}

} // namespace

TEST_CASE("chamfer distance") {
    SECTION("identical clouds score zero") {
        const auto a = random_cloud(100, 3);
        CHECK(chamfer_distance(a, a) == 0.0);
    }
    SECTION("single pair") {
        const std::vector<Vec3> a = {{0, 0, 0}};
        const std::vector<Vec3> b = {{1, 0, 0}};
        CHECK(chamfer_distance(a, b) == 1.0);
        CHECK(chamfer_distance(a, b, /*squared=*/true) == 1.0);
    }
    SECTION("hand-computed asymmetric case") {
        const std::vector<Vec3> a = {{0, 0, 0}, {2, 0, 0}};
        const std::vector<Vec3> b = {{1, 0, 0}};
        CHECK(chamfer_distance(a, b) == Catch::Approx(1.0).margin(1e-15));
        // squared mode: a->b mean = 1, b->a = 1
        CHECK(chamfer_distance(a, b, true) == Catch::Approx(1.0).margin(1e-15));
    }
    SECTION("symmetry") {
        const auto a = random_cloud(80, 5);
        const auto b = random_cloud(60, 6);
        CHECK(chamfer_distance(a, b) == chamfer_distance(b, a));
    }
    SECTION("empty clouds raise") {
        const std::vector<Vec3> a = {{0, 0, 0}};
        const std::vector<Vec3> none;
        CHECK_THROWS_AS(chamfer_distance(a, none), std::invalid_argument);
        CHECK_THROWS_AS(chamfer_distance(none, a), std::invalid_argument);
    }
}

TEST_CASE("f-score") {
    SECTION("identical clouds score one") {
        const auto a = random_cloud(100, 7);
        CHECK(f_score(a, a, 0.05) == 1.0);
    }
    SECTION("no matches at small tau") {
        const std::vector<Vec3> a = {{0, 0, 0}};
        const std::vector<Vec3> b = {{1, 0, 0}};
        CHECK(f_score(a, b, 0.5) == 0.0);
    }
    SECTION("hand-computed precision/recall mix") {
        const std::vector<Vec3> a = {{0, 0, 0}, {1, 0, 0}};
        const std::vector<Vec3> b = {{0, 0, 0}};
        // precision 1/2, recall 1 -> F = 2/3
        CHECK(f_score(a, b, 0.1) == Catch::Approx(2.0 / 3.0).margin(1e-15));
    }
    SECTION("monotone non-decreasing in tau") {
        const auto a = random_cloud(60, 11);
        const auto b = random_cloud(60, 12);
        double prev = 0.0;
        for (double tau : {0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0}) {
            const double f = f_score(a, b, tau);
            CHECK(f >= prev);
            prev = f;
        }
        CHECK(prev == 1.0);  // every point matched at huge tau
    }
    SECTION("domain errors") {
        const std::vector<Vec3> a = {{0, 0, 0}};
        const std::vector<Vec3> none;
        CHECK_THROWS_AS(f_score(a, a, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(f_score(a, none, 0.1), std::invalid_argument);
    }
}

TEST_CASE("voxel occupancy") {
    SECTION("cube occupancy count matches its volume") {
        // half-extent 0.5 cube: occupies exactly 16^3 of 32^3 voxel centers
        const auto grid = voxelize(testutil::make_cube(), 32);
        CHECK(grid.count() == 16 * 16 * 16);
    }
    SECTION("identical meshes give IoU one") {
        CHECK(voxel_iou(testutil::make_cube(), testutil::make_cube(), 32) == 1.0);
        const auto sphere = testutil::make_icosphere(2, 0.8);
        CHECK(voxel_iou(sphere, sphere, 16) == 1.0);
    }
    SECTION("half-shifted cube: analytic overlap 1/3") {
        const auto a = testutil::make_cube({0, 0, 0}, 0.5);
        const auto b = testutil::make_cube({0.5, 0, 0}, 0.5);
        const double iou = voxel_iou(a, b, 32);
        CHECK(iou == Catch::Approx(1.0 / 3.0).margin(2.0 / 32.0));
    }
    SECTION("disjoint cubes give zero") {
        const auto a = testutil::make_cube({-0.6, 0, 0}, 0.25);
        const auto b = testutil::make_cube({0.6, 0, 0}, 0.25);
        CHECK(voxel_iou(a, b, 16) == 0.0);
    }
    SECTION("non-watertight input raises") {
        const auto open = testutil::make_split_square();
        CHECK_THROWS_AS(voxel_iou(open, testutil::make_cube(), 16), std::invalid_argument);
    }
    SECTION("zero union raises") {
        // far smaller than the voxel pitch at R=8 and between centers
        const auto tiny = testutil::make_cube({0, 0, 0}, 0.05);
        CHECK_THROWS_AS(voxel_iou(tiny, tiny, 8), std::invalid_argument);
    }
    SECTION("resolution floor") {
        CHECK_THROWS_AS(voxel_iou(testutil::make_cube(), testutil::make_cube(), 4),
                        std::invalid_argument);
    }
    SECTION("iou is symmetric") {
        const auto a = testutil::make_cube({-0.1, 0, 0}, 0.4);
        const auto b = testutil::make_icosphere(2, 0.5);
        CHECK(voxel_iou(a, b, 32) == voxel_iou(b, a, 32));
    }
}

TEST_CASE("rigid invariance of the metric protocol") {
    SECTION("chamfer and f-score under an arbitrary rigid transform") {
        const auto a = random_cloud(120, 21);
        const auto b = random_cloud(90, 22);
        const RigidTransform rt{{0.3, -0.8, 0.52}, 1.234, {0.4, -2.0, 0.7}};
        const auto ra = moved(rt, a);
        const auto rb = moved(rt, b);
        CHECK(chamfer_distance(ra, rb) == Catch::Approx(chamfer_distance(a, b)).margin(1e-6));
        CHECK(f_score(ra, rb, 0.25) == Catch::Approx(f_score(a, b, 0.25)).margin(1e-6));
    }
    SECTION("voxel IoU under lattice-preserving rigid moves") {
        // the occupancy lattice is invariant under quarter turns about a grid
        // axis and translations by whole voxel pitches, so IoU is exact there
        const int res = 16;
        const double pitch = 2.0 / res;
        const auto a = testutil::make_cube({-0.2, 0.1, 0}, 0.3);
        const auto b = testutil::make_icosphere(2, 0.4, {0.1, 0, 0});
        const double before = voxel_iou(a, b, res);

        const RigidTransform quarter{{0, 0, 1}, M_PI / 2.0, {pitch, -2 * pitch, pitch}};
        const double after = voxel_iou(moved(quarter, a), moved(quarter, b), res);
        CHECK(after == Catch::Approx(before).margin(1e-6));
    }
}

TEST_CASE("voxel IoU converges with resolution on smooth shapes") {
    const auto a = testutil::make_icosphere(3, 0.62);
    const auto b = testutil::make_icosphere(3, 0.62, {0.26, 0, 0});
    const double i8 = voxel_iou(a, b, 8);
    const double i16 = voxel_iou(a, b, 16);
    const double i32 = voxel_iou(a, b, 32);
    const double i64 = voxel_iou(a, b, 64);
    CHECK(std::abs(i16 - i32) < std::abs(i8 - i16));
    CHECK(std::abs(i32 - i64) < std::abs(i16 - i32));
}
