#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "viewgrid/camera.hpp"
#include "viewgrid/tape.hpp"

namespace viewgrid {

enum class CoordMode { learned, oracle };

// One view's feature map on a tape: [W, H, C+3], last three channels are the
// per-cell camera-space coordinate.
struct FeatureMap {
    Var data;
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;  // C, excluding the coordinate channels

    Var features() const;  // [W*H, C]
    Var coords() const;    // [W*H, 3]
};

// Pinhole camera with trainable pose and intrinsics (7 scalars). Focal
// lengths are kept positive through s = exp(raw).
struct LearnedCamera {
    Parameter yaw, pitch, roll;
    Parameter s_x_raw, s_y_raw;
    Parameter x_0, y_0;

    explicit LearnedCamera(const std::string& prefix);
    std::vector<Parameter*> parameters();

    Intrinsics intrinsics() const;  // decoded (exp applied)
};

// N cameras with yaw spread evenly over [0, 2pi) plus seeded sigma=0.01 noise
// on every scalar to break symmetry.
std::vector<LearnedCamera> init_cameras(std::size_t n, std::uint64_t seed);

namespace npl {

// Per-component map into [0, G-1]: (tanh(v)+1)/2*(G-1) in learned mode;
// oracle mode assumes inputs already in [-1,1] and applies the affine part
// only. Works on any shape.
Var squash_to_grid(Var points, std::size_t grid, CoordMode mode);

// points [n,3] in grid coordinates, feats [n,C] -> [C,G,G,G].
// Deposit weight per corner cell: prod_axis max(0, 1-|cell-coord|).
Var trilinear_scatter(Var points, Var feats, std::size_t grid);

// points2d [n,2] in grid coordinates, feats [n,C] -> [C,G,G].
Var bilinear_scatter(Var points2d, Var feats, std::size_t grid);

// World->camera extrinsics estimate living on a tape.
struct ExtrinsicEstimate {
    Var rotation;     // [3,3]
    Var translation;  // [3]
};

// Pooled feature vector [C] -> 6 outputs (yaw, pitch, roll, t) -> estimate.
ExtrinsicEstimate extrinsic_head(Var pooled, Parameter& w, Parameter& b);

// Ground-truth extrinsics as tape constants (oracle mode).
ExtrinsicEstimate oracle_extrinsics(Tape& tape, const Extrinsics& e);

struct ScatterResult {
    Var world_points;  // [n,3], pre-squash world-frame points
    Var grid_points;   // [n,3], same points mapped into grid index space
    Var grid;          // [C,G,G,G]
};

// camera_to_world + squash + trilinear deposit over every cell of fm.
ScatterResult scatter_world(const FeatureMap& fm, const ExtrinsicEstimate& e,
                            std::size_t grid, CoordMode mode);

// world_points [n,3] and feats [n,C] rendered through each camera:
// K = R*A, perspective divide, squash to the 2D grid, bilinear deposit.
// Output [(N*C), G, G], camera blocks along the channel axis.
Var project_views(Var world_points, Var feats, std::vector<LearnedCamera>& cams,
                  std::size_t grid, bool orthographic, CoordMode mode);

}  // namespace npl

}  // namespace viewgrid
