#include "viewgrid/npl.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "viewgrid/ops.hpp"
#include "viewgrid/rng.hpp"

namespace viewgrid {

Var FeatureMap::features() const {
    Var flat = ops::reshape(data, {width * height, channels + 3});
    return ops::slice_lastdim(flat, 0, channels);
}

Var FeatureMap::coords() const {
    Var flat = ops::reshape(data, {width * height, channels + 3});
    return ops::slice_lastdim(flat, channels, channels + 3);
}

LearnedCamera::LearnedCamera(const std::string& prefix)
    : yaw(prefix + ".yaw", Tensor::scalar(0.0)),
      pitch(prefix + ".pitch", Tensor::scalar(0.0)),
      roll(prefix + ".roll", Tensor::scalar(0.0)),
      s_x_raw(prefix + ".s_x_raw", Tensor::scalar(0.0)),
      s_y_raw(prefix + ".s_y_raw", Tensor::scalar(0.0)),
      x_0(prefix + ".x_0", Tensor::scalar(0.0)),
      y_0(prefix + ".y_0", Tensor::scalar(0.0)) {}

std::vector<Parameter*> LearnedCamera::parameters() {
    return {&yaw, &pitch, &roll, &s_x_raw, &s_y_raw, &x_0, &y_0};
}

Intrinsics LearnedCamera::intrinsics() const {
    return Intrinsics{std::exp(s_x_raw.value.item()), std::exp(s_y_raw.value.item()),
                      x_0.value.item(), y_0.value.item()};
}

std::vector<LearnedCamera> init_cameras(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("init_cameras: need at least one camera");
    std::vector<LearnedCamera> cams;
    cams.reserve(n);
    Rng rng = Rng::derive(seed, /*stream=*/0x6361'6d73);  // "cams"
    for (std::size_t i = 0; i < n; ++i) {
        LearnedCamera cam("camera" + std::to_string(i));
        cam.yaw.value[0] = 2.0 * std::numbers::pi * static_cast<double>(i) /
                           static_cast<double>(n);
        for (Parameter* p : cam.parameters()) p->value[0] += 0.01 * rng.normal();
        cams.push_back(std::move(cam));
    }
    return cams;
}

namespace npl {

Var squash_to_grid(Var points, std::size_t grid, CoordMode mode) {
    if (grid < 2) throw std::invalid_argument("squash_to_grid: grid side must be >= 2");
    double half = static_cast<double>(grid - 1) / 2.0;
    Var centered = mode == CoordMode::learned ? ops::tanh(points) : points;
    return ops::scale(ops::add_scalar(centered, 1.0), half);
}

namespace {

void check_scatter_args(const Tensor& pts, const Tensor& feats, std::size_t dim,
                        std::size_t grid) {
    if (pts.rank() != 2 || pts.dim(1) != dim)
        throw std::invalid_argument("scatter: points must be [n," + std::to_string(dim) + "]");
    if (feats.rank() != 2 || feats.dim(0) != pts.dim(0))
        throw std::invalid_argument("scatter: features must be [n,C]");
    if (grid < 2) throw std::invalid_argument("scatter: grid side must be >= 2");
}

inline double corner_weight(double coord, std::ptrdiff_t cell) {
    double d = std::abs(static_cast<double>(cell) - coord);
    return d < 1.0 ? 1.0 - d : 0.0;
}

// d/dcoord of corner_weight; 0 outside the support and at the apex.
inline double corner_weight_dcoord(double coord, std::ptrdiff_t cell) {
    double diff = coord - static_cast<double>(cell);
    if (diff > 0.0 && diff < 1.0) return -1.0;
    if (diff < 0.0 && diff > -1.0) return 1.0;
    return 0.0;
}

}  // namespace

Var trilinear_scatter(Var points, Var feats, std::size_t grid) {
    Tape& t = *points.tape;
    const Tensor& pv = points.value();
    const Tensor& fv = feats.value();
    check_scatter_args(pv, fv, 3, grid);
    std::size_t n = pv.dim(0), c = fv.dim(1);
    std::ptrdiff_t g = static_cast<std::ptrdiff_t>(grid);
    Tensor out({c, grid, grid, grid});
    std::size_t gg = grid * grid;
    for (std::size_t i = 0; i < n; ++i) {
        double px = pv[i * 3 + 0], py = pv[i * 3 + 1], pz = pv[i * 3 + 2];
        std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(std::floor(px));
        std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(std::floor(py));
        std::ptrdiff_t z0 = static_cast<std::ptrdiff_t>(std::floor(pz));
        for (std::ptrdiff_t ix = x0; ix <= x0 + 1; ++ix) {
            if (ix < 0 || ix >= g) continue;
            double wx = corner_weight(px, ix);
            if (wx == 0.0) continue;
            for (std::ptrdiff_t iy = y0; iy <= y0 + 1; ++iy) {
                if (iy < 0 || iy >= g) continue;
                double wy = corner_weight(py, iy);
                if (wy == 0.0) continue;
                for (std::ptrdiff_t iz = z0; iz <= z0 + 1; ++iz) {
                    if (iz < 0 || iz >= g) continue;
                    double w = wx * wy * corner_weight(pz, iz);
                    if (w == 0.0) continue;
                    std::size_t cell = static_cast<std::size_t>(ix) * gg +
                                       static_cast<std::size_t>(iy) * grid +
                                       static_cast<std::size_t>(iz);
                    for (std::size_t ch = 0; ch < c; ++ch)
                        out[ch * grid * gg + cell] += w * fv[i * c + ch];
                }
            }
        }
    }
    std::size_t ip = points.id, if_ = feats.id;
    return t.emit(std::move(out), {ip, if_}, [ip, if_, n, c, grid, g, gg](Tape& t,
                                                                          std::size_t id) {
        const Tensor& gr = t.grad(id);
        const Tensor& pv = t.value(ip);
        const Tensor& fv = t.value(if_);
        Tensor& gp = t.grad(ip);
        Tensor& gf = t.grad(if_);
        for (std::size_t i = 0; i < n; ++i) {
            double p[3] = {pv[i * 3 + 0], pv[i * 3 + 1], pv[i * 3 + 2]};
            std::ptrdiff_t base[3] = {static_cast<std::ptrdiff_t>(std::floor(p[0])),
                                      static_cast<std::ptrdiff_t>(std::floor(p[1])),
                                      static_cast<std::ptrdiff_t>(std::floor(p[2]))};
            for (std::ptrdiff_t ix = base[0]; ix <= base[0] + 1; ++ix) {
                if (ix < 0 || ix >= g) continue;
                double wx = corner_weight(p[0], ix);
                double dwx = corner_weight_dcoord(p[0], ix);
                for (std::ptrdiff_t iy = base[1]; iy <= base[1] + 1; ++iy) {
                    if (iy < 0 || iy >= g) continue;
                    double wy = corner_weight(p[1], iy);
                    double dwy = corner_weight_dcoord(p[1], iy);
                    for (std::ptrdiff_t iz = base[2]; iz <= base[2] + 1; ++iz) {
                        if (iz < 0 || iz >= g) continue;
                        double wz = corner_weight(p[2], iz);
                        double dwz = corner_weight_dcoord(p[2], iz);
                        double w = wx * wy * wz;
                        double dw[3] = {dwx * wy * wz, wx * dwy * wz, wx * wy * dwz};
                        if (w == 0.0 && dw[0] == 0.0 && dw[1] == 0.0 && dw[2] == 0.0)
                            continue;
                        std::size_t cell = static_cast<std::size_t>(ix) * gg +
                                           static_cast<std::size_t>(iy) * grid +
                                           static_cast<std::size_t>(iz);
                        for (std::size_t ch = 0; ch < c; ++ch) {
                            double go = gr[ch * grid * gg + cell];
                            if (go == 0.0) continue;
                            gf[i * c + ch] += go * w;
                            double f = fv[i * c + ch];
                            gp[i * 3 + 0] += go * f * dw[0];
                            gp[i * 3 + 1] += go * f * dw[1];
                            gp[i * 3 + 2] += go * f * dw[2];
                        }
                    }
                }
            }
        }
    });
}

Var bilinear_scatter(Var points2d, Var feats, std::size_t grid) {
    Tape& t = *points2d.tape;
    const Tensor& pv = points2d.value();
    const Tensor& fv = feats.value();
    check_scatter_args(pv, fv, 2, grid);
    std::size_t n = pv.dim(0), c = fv.dim(1);
    std::ptrdiff_t g = static_cast<std::ptrdiff_t>(grid);
    Tensor out({c, grid, grid});
    for (std::size_t i = 0; i < n; ++i) {
        double px = pv[i * 2 + 0], py = pv[i * 2 + 1];
        std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(std::floor(px));
        std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(std::floor(py));
        for (std::ptrdiff_t ix = x0; ix <= x0 + 1; ++ix) {
            if (ix < 0 || ix >= g) continue;
            double wx = corner_weight(px, ix);
            if (wx == 0.0) continue;
            for (std::ptrdiff_t iy = y0; iy <= y0 + 1; ++iy) {
                if (iy < 0 || iy >= g) continue;
                double w = wx * corner_weight(py, iy);
                if (w == 0.0) continue;
                std::size_t cell =
                    static_cast<std::size_t>(ix) * grid + static_cast<std::size_t>(iy);
                for (std::size_t ch = 0; ch < c; ++ch)
                    out[ch * grid * grid + cell] += w * fv[i * c + ch];
            }
        }
    }
    std::size_t ip = points2d.id, if_ = feats.id;
    return t.emit(std::move(out), {ip, if_}, [ip, if_, n, c, grid, g](Tape& t,
                                                                      std::size_t id) {
        const Tensor& gr = t.grad(id);
        const Tensor& pv = t.value(ip);
        const Tensor& fv = t.value(if_);
        Tensor& gp = t.grad(ip);
        Tensor& gf = t.grad(if_);
        for (std::size_t i = 0; i < n; ++i) {
            double px = pv[i * 2 + 0], py = pv[i * 2 + 1];
            std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(std::floor(px));
            std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(std::floor(py));
            for (std::ptrdiff_t ix = x0; ix <= x0 + 1; ++ix) {
                if (ix < 0 || ix >= g) continue;
                double wx = corner_weight(px, ix);
                double dwx = corner_weight_dcoord(px, ix);
                for (std::ptrdiff_t iy = y0; iy <= y0 + 1; ++iy) {
                    if (iy < 0 || iy >= g) continue;
                    double wy = corner_weight(py, iy);
                    double dwy = corner_weight_dcoord(py, iy);
                    double w = wx * wy;
                    if (w == 0.0 && dwx * wy == 0.0 && wx * dwy == 0.0) continue;
                    std::size_t cell =
                        static_cast<std::size_t>(ix) * grid + static_cast<std::size_t>(iy);
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        double go = gr[ch * grid * grid + cell];
                        if (go == 0.0) continue;
                        gf[i * c + ch] += go * w;
                        double f = fv[i * c + ch];
                        gp[i * 2 + 0] += go * f * dwx * wy;
                        gp[i * 2 + 1] += go * f * wx * dwy;
                    }
                }
            }
        }
    });
}

ExtrinsicEstimate extrinsic_head(Var pooled, Parameter& w, Parameter& b) {
    Tape& t = *pooled.tape;
    Var out = ops::affine(pooled, t.leaf(w), t.leaf(b));
    if (out.value().size() != 6)
        throw std::invalid_argument("extrinsic_head: head must produce 6 outputs");
    Var rot = diff::euler_rotation(ops::at(out, 0), ops::at(out, 1), ops::at(out, 2));
    Var trans = ops::stack_scalars({ops::at(out, 3), ops::at(out, 4), ops::at(out, 5)});
    return ExtrinsicEstimate{rot, trans};
}

ExtrinsicEstimate oracle_extrinsics(Tape& tape, const Extrinsics& e) {
    Tensor r({3, 3});
    for (int i = 0; i < 9; ++i) r[i] = e.rotation[i];
    Tensor tr({3});
    for (int i = 0; i < 3; ++i) tr[i] = e.translation[i];
    return ExtrinsicEstimate{tape.constant(std::move(r)), tape.constant(std::move(tr))};
}

ScatterResult scatter_world(const FeatureMap& fm, const ExtrinsicEstimate& e,
                            std::size_t grid, CoordMode mode) {
    Var world = diff::camera_to_world_rows(fm.coords(), e.rotation, e.translation);
    Var grid_pts = squash_to_grid(world, grid, mode);
    Var wg = trilinear_scatter(grid_pts, fm.features(), grid);
    return ScatterResult{world, grid_pts, wg};
}

Var project_views(Var world_points, Var feats, std::vector<LearnedCamera>& cams,
                  std::size_t grid, bool orthographic, CoordMode mode) {
    if (cams.empty()) throw std::invalid_argument("project_views: no cameras");
    Tape& t = *world_points.tape;
    std::vector<Var> blocks;
    blocks.reserve(cams.size());
    for (LearnedCamera& cam : cams) {
        Var rot = diff::euler_rotation(t.leaf(cam.yaw), t.leaf(cam.pitch), t.leaf(cam.roll));
        Var k = diff::intrinsic_matrix(ops::exp(t.leaf(cam.s_x_raw)),
                                       ops::exp(t.leaf(cam.s_y_raw)), t.leaf(cam.x_0),
                                       t.leaf(cam.y_0), rot);
        Var q = ops::matmul_nt(world_points, k);  // rows (K p)^T
        Var uv = diff::perspective_divide_rows(q, orthographic);
        Var uv_grid = squash_to_grid(uv, grid, mode);
        blocks.push_back(bilinear_scatter(uv_grid, feats, grid));
    }
    return ops::concat0(blocks);
}

}  // namespace npl

}  // namespace viewgrid
