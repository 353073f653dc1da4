#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <memory>

#include "doctest.h"
#include "viewgrid/camera.hpp"
#include "viewgrid/rng.hpp"
#include "viewgrid/tape.hpp"

using namespace viewgrid;

namespace {

double mat_det(const Mat3& m) {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

double max_abs_diff(const Mat3& a, const Mat3& b) {
    double m = 0.0;
    for (int i = 0; i < 9; ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("rotation_from_euler basics") {
    Mat3 id = rotation_from_euler({0, 0, 0});
    CHECK(max_abs_diff(id, Mat3{1, 0, 0, 0, 1, 0, 0, 0, 1}) == 0.0);

    // yaw about the up axis: R_y(pi/2) maps +x to -z and +z to +x.
    Mat3 r = rotation_from_euler({M_PI / 2, 0, 0});
    Vec3 px = mat_apply(r, {1, 0, 0});
    CHECK(px[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(px[1] == 0.0);
    CHECK(px[2] == doctest::Approx(-1.0).epsilon(1e-12));
    Vec3 pz = mat_apply(r, {0, 0, 1});
    CHECK(pz[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pz[2] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("rotations are orthonormal with determinant 1") {
    Rng rng(401);
    for (int k = 0; k < 1000; ++k) {
        EulerAngles a{rng.uniform(-M_PI, M_PI), rng.uniform(-M_PI, M_PI),
                      rng.uniform(-M_PI, M_PI)};
        Mat3 r = rotation_from_euler(a);
        Mat3 rrt = mat_mul(r, mat_transpose(r));
        CHECK(max_abs_diff(rrt, Mat3{1, 0, 0, 0, 1, 0, 0, 0, 1}) < 1e-9);
        CHECK(mat_det(r) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("extrinsics invert and round trip") {
    Rng rng(402);
    for (int k = 0; k < 100; ++k) {
        Extrinsics e;
        e.rotation = rotation_from_euler(
            {rng.uniform(-M_PI, M_PI), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
        e.translation = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        Vec3 p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};

        Vec3 cam = world_to_camera(p, e);
        Vec3 back = camera_to_world(cam, e);
        for (int i = 0; i < 3; ++i) CHECK(back[i] == doctest::Approx(p[i]).epsilon(1e-12));

        // invert_extrinsics composed with the forward map is the identity.
        Extrinsics inv = invert_extrinsics(e);
        Vec3 same = world_to_camera(cam, inv);
        for (int i = 0; i < 3; ++i) CHECK(same[i] == doctest::Approx(p[i]).epsilon(1e-12));
    }
}

TEST_CASE("project_point") {
    Mat3 id{1, 0, 0, 0, 1, 0, 0, 0, 1};
    SUBCASE("unit depth") {
        auto q = project_point(id, {0.5, 0.5, 1.0});
        CHECK(q[0] == 0.5);
        CHECK(q[1] == 0.5);
    }
    SUBCASE("perspective divide") {
        auto q = project_point(id, {1.0, 2.0, 2.0});
        CHECK(q[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(q[1] == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("focal scaling") {
        Mat3 k = intrinsic_matrix({2.0, 1.0, 0.0, 0.0}, id);
        auto q = project_point(k, {1.0, 0.0, 1.0});
        CHECK(q[0] == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(q[1] == 0.0);
        // doubling s_x doubles the first coordinate when x_0 = 0
        Mat3 k2 = intrinsic_matrix({4.0, 1.0, 0.0, 0.0}, id);
        auto q2 = project_point(k2, {1.0, 0.0, 1.0});
        CHECK(q2[0] == doctest::Approx(2.0 * q[0]).epsilon(1e-15));
    }
    SUBCASE("depth clamp keeps the op total and sign-aware") {
        auto qp = project_point(id, {1.0, 1.0, 1e-9});
        CHECK(qp[0] == doctest::Approx(1.0 / kDepthEps).epsilon(1e-12));
        auto qn = project_point(id, {1.0, 1.0, -1e-9});
        CHECK(qn[0] == doctest::Approx(-1.0 / kDepthEps).epsilon(1e-12));
        CHECK(std::isfinite(qp[1]));
    }
    SUBCASE("orthographic skips the divide") {
        auto q = project_point(id, {1.0, 2.0, 2.0}, true);
        CHECK(q[0] == 1.0);
        CHECK(q[1] == 2.0);
    }
}

TEST_CASE("intrinsic_matrix composes K = R * A") {
    Mat3 r = rotation_from_euler({0.3, -0.2, 0.1});
    Intrinsics in{1.5, 0.8, 0.25, -0.4};
    Mat3 a{in.s_x, 0, in.x_0, 0, in.s_y, in.y_0, 0, 0, 1};
    Mat3 k = intrinsic_matrix(in, r);
    CHECK(max_abs_diff(k, mat_mul(r, a)) < 1e-15);
}

TEST_CASE("differentiable camera ops match the plain versions") {
    EulerAngles a{0.7, -0.4, 0.2};
    Mat3 r = rotation_from_euler(a);

    auto yaw = std::make_shared<Parameter>("yaw", Tensor({}, a.yaw));
    auto pitch = std::make_shared<Parameter>("pitch", Tensor({}, a.pitch));
    auto roll = std::make_shared<Parameter>("roll", Tensor({}, a.roll));
    Tape t;
    Var rv = diff::euler_rotation(t.leaf(*yaw), t.leaf(*pitch), t.leaf(*roll));
    for (int i = 0; i < 9; ++i)
        CHECK(rv.value()[i] == doctest::Approx(r[i]).epsilon(1e-15));

    Extrinsics e{r, {0.3, -0.1, 0.6}};
    Vec3 p{0.4, -0.8, 0.2};
    Vec3 cam = world_to_camera(p, e);
    Vec3 wld = camera_to_world(cam, e);

    Tensor pts({1, 3}, std::vector<double>{cam[0], cam[1], cam[2]});
    Tensor tr({3}, std::vector<double>{e.translation[0], e.translation[1], e.translation[2]});
    Var back = diff::camera_to_world_rows(t.constant(pts), rv, t.constant(tr));
    for (int i = 0; i < 3; ++i)
        CHECK(back.value()[i] == doctest::Approx(wld[i]).epsilon(1e-12));

    Tensor wpts({1, 3}, std::vector<double>{p[0], p[1], p[2]});
    Var fwd = diff::world_to_camera_rows(t.constant(wpts), rv, t.constant(tr));
    for (int i = 0; i < 3; ++i)
        CHECK(fwd.value()[i] == doctest::Approx(cam[i]).epsilon(1e-12));

    // perspective divide rows against project_point
    Mat3 k = intrinsic_matrix({1, 1, 0, 0}, r);
    auto q = project_point(k, p);
    Vec3 kp = mat_apply(k, p);
    Tensor qs({1, 3}, std::vector<double>{kp[0], kp[1], kp[2]});
    Var div = diff::perspective_divide_rows(t.constant(qs), false);
    CHECK(div.value()[0] == doctest::Approx(q[0]).epsilon(1e-12));
    CHECK(div.value()[1] == doctest::Approx(q[1]).epsilon(1e-12));
}
