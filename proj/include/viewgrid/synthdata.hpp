#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "viewgrid/camera.hpp"
#include "viewgrid/tensor.hpp"

namespace viewgrid {

inline constexpr std::size_t kJoints = 13;
inline constexpr std::size_t kFrames = 8;

// Per-sample trajectory variation. Canonical trajectories use the defaults.
struct SampleJitter {
    double amplitude = 1.0;  // scales motion amplitude, not the base pose
    Vec3 offset{0, 0, 0};    // whole-body world offset
};

struct ActionClass {
    int id = 0;
    std::string name;
    // [T][J] world positions in [-1,1]^3.
    std::function<std::vector<std::vector<Vec3>>(const SampleJitter&)> trajectory;
};

// The five built-in motions: raise, squat, wave, spin, lean.
const std::vector<ActionClass>& class_library();

struct DatasetConfig {
    std::size_t num_classes = 5;
    std::size_t samples_per_class = 20;  // per split
    std::size_t raster = 16;             // W = H
    std::size_t frames = kFrames;        // T
    std::size_t train_views = 2;
    std::size_t test_views = 1;
    double seen_yaw_min_deg = -30.0;
    double seen_yaw_max_deg = 30.0;
    double unseen_yaw_min_deg = 150.0;
    double unseen_yaw_max_deg = 210.0;
    double pitch_jitter_deg = 10.0;
    double translation_jitter = 0.05;
    double sigma = 0.02;  // noise on rendered coordinate channels
    std::uint64_t seed = 1;
};

// One occupied raster cell: indices, camera-space coordinate (with noise),
// and the feature vector (one-hot joint id scaled by temporal phase).
struct Cell {
    std::size_t i = 0;  // x cell
    std::size_t j = 0;  // y cell
    Vec3 coord{0, 0, 0};
    std::vector<double> feat;
};

struct ViewRender {
    EulerAngles angles;
    Extrinsics extrinsics;                 // world -> camera
    std::vector<std::vector<Cell>> frames;  // [T][occupied cells]
};

struct Sample {
    int class_id = 0;
    std::string split;  // train-seen | test-seen | test-unseen
    std::vector<std::vector<Vec3>> world;  // [T][J]
    std::vector<ViewRender> views;
};

struct Dataset {
    DatasetConfig config;
    std::vector<Sample> samples;

    std::vector<const Sample*> split(const std::string& name) const;
};

// Deterministic in cfg (including seed). Throws std::runtime_error naming the
// sample if a feasible render cannot be found within the resample budget.
Dataset generate_dataset(const DatasetConfig& cfg);

// JSON-Lines round trip; see header line for format/version.
// Throws std::invalid_argument naming the offending field.
void validate_dataset_config(const DatasetConfig& cfg);

void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

// Config <-> JSON (shared by the dataset header, run reports, CLI config).
nlohmann::ordered_json dataset_config_to_json(const DatasetConfig& c);
DatasetConfig dataset_config_from_json(const nlohmann::ordered_json& j);

// Dense per-frame rasters for model input, channel-major.
struct FrameRaster {
    Tensor feat;   // [J, H, W]
    Tensor coord;  // [3, H, W]
};
std::vector<FrameRaster> rasterize(const ViewRender& view, const DatasetConfig& cfg);

// Classifies world trajectories by nearest class centroid (computed from the
// train-seen split); returns accuracy over the named split. Separability
// floor check: must be 1.0 on every split for the default config.
double nearest_centroid_accuracy(const Dataset& ds, const std::string& split);

}  // namespace viewgrid
