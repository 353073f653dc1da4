#include "viewgrid/camera.hpp"

#include <cmath>
#include <stdexcept>

#include "viewgrid/ops.hpp"

namespace viewgrid {

Mat3 rotation_from_euler(const EulerAngles& a) {
    double cy = std::cos(a.yaw), sy = std::sin(a.yaw);
    double cx = std::cos(a.pitch), sx = std::sin(a.pitch);
    double cz = std::cos(a.roll), sz = std::sin(a.roll);
    Mat3 ry{cy, 0, sy, 0, 1, 0, -sy, 0, cy};
    Mat3 rx{1, 0, 0, 0, cx, -sx, 0, sx, cx};
    Mat3 rz{cz, -sz, 0, sz, cz, 0, 0, 0, 1};
    return mat_mul(mat_mul(ry, rx), rz);
}

Mat3 mat_mul(const Mat3& a, const Mat3& b) {
    Mat3 out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += a[i * 3 + k] * b[k * 3 + j];
            out[i * 3 + j] = s;
        }
    return out;
}

Mat3 mat_transpose(const Mat3& a) {
    return Mat3{a[0], a[3], a[6], a[1], a[4], a[7], a[2], a[5], a[8]};
}

Vec3 mat_apply(const Mat3& m, const Vec3& v) {
    return Vec3{m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
                m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
                m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

Extrinsics invert_extrinsics(const Extrinsics& e) {
    Mat3 rt = mat_transpose(e.rotation);
    Vec3 mt = mat_apply(rt, e.translation);
    return Extrinsics{rt, Vec3{-mt[0], -mt[1], -mt[2]}};
}

Vec3 world_to_camera(const Vec3& p, const Extrinsics& e) {
    Vec3 r = mat_apply(e.rotation, p);
    return Vec3{r[0] + e.translation[0], r[1] + e.translation[1], r[2] + e.translation[2]};
}

Vec3 camera_to_world(const Vec3& p, const Extrinsics& e) {
    Vec3 d{p[0] - e.translation[0], p[1] - e.translation[1], p[2] - e.translation[2]};
    return mat_apply(mat_transpose(e.rotation), d);
}

Mat3 intrinsic_matrix(const Intrinsics& i, const Mat3& r) {
    if (i.s_x <= 0.0 || i.s_y <= 0.0)
        throw std::invalid_argument("intrinsic_matrix: focal lengths must be positive");
    Mat3 a{i.s_x, 0, i.x_0, 0, i.s_y, i.y_0, 0, 0, 1};
    return mat_mul(r, a);
}

std::array<double, 2> project_point(const Mat3& k, const Vec3& p_w, bool orthographic) {
    Vec3 q = mat_apply(k, p_w);
    if (orthographic) return {q[0], q[1]};
    double az = std::abs(q[2]);
    double zc = az >= kDepthEps ? q[2] : (q[2] >= 0.0 ? kDepthEps : -kDepthEps);
    return {q[0] / zc, q[1] / zc};
}

namespace diff {

namespace {

struct Trig {
    double cy, sy, cx, sx, cz, sz;
};

Trig trig_of(double yaw, double pitch, double roll) {
    return Trig{std::cos(yaw), std::sin(yaw), std::cos(pitch),
                std::sin(pitch), std::cos(roll), std::sin(roll)};
}

Mat3 ry_of(const Trig& t) { return Mat3{t.cy, 0, t.sy, 0, 1, 0, -t.sy, 0, t.cy}; }
Mat3 rx_of(const Trig& t) { return Mat3{1, 0, 0, 0, t.cx, -t.sx, 0, t.sx, t.cx}; }
Mat3 rz_of(const Trig& t) { return Mat3{t.cz, -t.sz, 0, t.sz, t.cz, 0, 0, 0, 1}; }
// Derivatives of the factor matrices w.r.t. their own angle.
Mat3 dry_of(const Trig& t) { return Mat3{-t.sy, 0, t.cy, 0, 0, 0, -t.cy, 0, -t.sy}; }
Mat3 drx_of(const Trig& t) { return Mat3{0, 0, 0, 0, -t.sx, -t.cx, 0, t.cx, -t.sx}; }
Mat3 drz_of(const Trig& t) { return Mat3{-t.sz, -t.cz, 0, t.cz, -t.sz, 0, 0, 0, 0}; }

double frob_dot(const Tensor& g, const Mat3& m) {
    double s = 0.0;
    for (int i = 0; i < 9; ++i) s += g[i] * m[i];
    return s;
}

}  // namespace

Var euler_rotation(Var yaw, Var pitch, Var roll) {
    Tape& t = *yaw.tape;
    double vy = yaw.item(), vp = pitch.item(), vr = roll.item();
    Trig tr = trig_of(vy, vp, vr);
    Mat3 r = mat_mul(mat_mul(ry_of(tr), rx_of(tr)), rz_of(tr));
    Tensor out({3, 3});
    for (int i = 0; i < 9; ++i) out[i] = r[i];
    std::size_t iy = yaw.id, ip = pitch.id, ir = roll.id;
    return t.emit(std::move(out), {iy, ip, ir}, [iy, ip, ir](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        Trig tr = trig_of(t.value(iy).item(), t.value(ip).item(), t.value(ir).item());
        Mat3 ry = ry_of(tr), rx = rx_of(tr), rz = rz_of(tr);
        t.grad(iy)[0] += frob_dot(g, mat_mul(mat_mul(dry_of(tr), rx), rz));
        t.grad(ip)[0] += frob_dot(g, mat_mul(mat_mul(ry, drx_of(tr)), rz));
        t.grad(ir)[0] += frob_dot(g, mat_mul(mat_mul(ry, rx), drz_of(tr)));
    });
}

Var camera_to_world_rows(Var points, Var rotation, Var translation) {
    // R^T (p - t) per row equals (p - t) * R in row-vector form.
    return ops::matmul(ops::sub_row(points, translation), rotation);
}

Var world_to_camera_rows(Var points, Var rotation, Var translation) {
    // R p + t per row equals p * R^T + t.
    return ops::sub_row(ops::matmul_nt(points, rotation), ops::neg(translation));
}

Var intrinsic_matrix(Var s_x, Var s_y, Var x_0, Var y_0, Var rotation) {
    Tape& t = *s_x.tape;
    Var zero = t.constant(Tensor::scalar(0.0));
    Var one = t.constant(Tensor::scalar(1.0));
    Var a = ops::stack_scalars({s_x, zero, x_0, zero, s_y, y_0, zero, zero, one});
    return ops::matmul(rotation, ops::reshape(a, {3, 3}));
}

Var perspective_divide_rows(Var q, bool orthographic) {
    Tape& t = *q.tape;
    const Tensor& qv = q.value();
    if (qv.rank() != 2 || qv.dim(1) != 3)
        throw std::invalid_argument("perspective_divide_rows: expected [n,3]");
    std::size_t n = qv.dim(0);
    Tensor out({n, 2});
    for (std::size_t i = 0; i < n; ++i) {
        double qx = qv[i * 3 + 0], qy = qv[i * 3 + 1], qz = qv[i * 3 + 2];
        if (orthographic) {
            out[i * 2 + 0] = qx;
            out[i * 2 + 1] = qy;
        } else {
            double az = std::abs(qz);
            double zc = az >= kDepthEps ? qz : (qz >= 0.0 ? kDepthEps : -kDepthEps);
            out[i * 2 + 0] = qx / zc;
            out[i * 2 + 1] = qy / zc;
        }
    }
    std::size_t iq = q.id;
    return t.emit(std::move(out), {iq}, [iq, n, orthographic](Tape& t, std::size_t id) {
        const Tensor& g = t.grad(id);
        const Tensor& qv = t.value(iq);
        Tensor& gq = t.grad(iq);
        for (std::size_t i = 0; i < n; ++i) {
            double gx = g[i * 2 + 0], gy = g[i * 2 + 1];
            if (orthographic) {
                gq[i * 3 + 0] += gx;
                gq[i * 3 + 1] += gy;
                continue;
            }
            double qx = qv[i * 3 + 0], qy = qv[i * 3 + 1], qz = qv[i * 3 + 2];
            double az = std::abs(qz);
            bool clamped = az < kDepthEps;
            double zc = clamped ? (qz >= 0.0 ? kDepthEps : -kDepthEps) : qz;
            gq[i * 3 + 0] += gx / zc;
            gq[i * 3 + 1] += gy / zc;
            if (!clamped) gq[i * 3 + 2] += -(gx * qx + gy * qy) / (qz * qz);
        }
    });
}

}  // namespace diff

}  // namespace viewgrid
