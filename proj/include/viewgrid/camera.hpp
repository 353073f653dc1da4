#pragma once

#include <array>

#include "viewgrid/tape.hpp"

namespace viewgrid {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;  // row-major

struct EulerAngles {
    double yaw = 0.0;
    double pitch = 0.0;
    double roll = 0.0;
};

// s = focal lengths, (x_0, y_0) = principal-point offsets.
struct Intrinsics {
    double s_x = 1.0;
    double s_y = 1.0;
    double x_0 = 0.0;
    double y_0 = 0.0;
};

// Forward (world -> camera) rigid transform x |-> R x + t.
struct Extrinsics {
    Mat3 rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
    Vec3 translation{0, 0, 0};
};

// Sign-preserving clamp floor for the perspective denominator.
inline constexpr double kDepthEps = 1e-3;

// Convention: R = R_y(yaw) * R_x(pitch) * R_z(roll), yaw about the world
// up-axis, with R_y = [[c,0,s],[0,1,0],[-s,0,c]].
Mat3 rotation_from_euler(const EulerAngles& a);

Mat3 mat_mul(const Mat3& a, const Mat3& b);
Mat3 mat_transpose(const Mat3& a);
Vec3 mat_apply(const Mat3& m, const Vec3& v);

// (R, t) -> (R^T, -R^T t): the inverse of x |-> R x + t.
Extrinsics invert_extrinsics(const Extrinsics& e);

Vec3 world_to_camera(const Vec3& p, const Extrinsics& e);  // R p + t
Vec3 camera_to_world(const Vec3& p, const Extrinsics& e);  // R^T (p - t)

// K = R * [[s_x, 0, x_0], [0, s_y, y_0], [0, 0, 1]]
Mat3 intrinsic_matrix(const Intrinsics& i, const Mat3& r);

// q = K p_w; returns (q_x/q_z, q_y/q_z) with |q_z| floored at kDepthEps
// (sign preserved). Orthographic mode skips the divide.
std::array<double, 2> project_point(const Mat3& k, const Vec3& p_w,
                                    bool orthographic = false);

// Differentiable counterparts. Points are carried row-wise as [n,3] tensors.
namespace diff {

// (yaw, pitch, roll) scalars -> [3,3] rotation, same convention as above.
Var euler_rotation(Var yaw, Var pitch, Var roll);

// rows of R^T (p - t): points [n,3], rotation [3,3], translation [3].
Var camera_to_world_rows(Var points, Var rotation, Var translation);
// rows of R p + t.
Var world_to_camera_rows(Var points, Var rotation, Var translation);

// K from scalar intrinsics and a [3,3] rotation.
Var intrinsic_matrix(Var s_x, Var s_y, Var x_0, Var y_0, Var rotation);

// q [n,3] -> [n,2]; same clamp semantics as project_point.
Var perspective_divide_rows(Var q, bool orthographic);

}  // namespace diff

}  // namespace viewgrid
