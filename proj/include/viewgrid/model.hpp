#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "viewgrid/npl.hpp"
#include "viewgrid/synthdata.hpp"
#include "viewgrid/tape.hpp"

namespace viewgrid {

enum class Head { world3d, multiview2d, baseline_none, repmatch };

const char* head_name(Head h);
Head head_from_name(const std::string& name);
const char* coord_mode_name(CoordMode m);
CoordMode coord_mode_from_name(const std::string& name);

struct ModelConfig {
    std::size_t channels = 16;        // C
    std::size_t grid = 16;            // G
    std::size_t num_cameras = 3;      // N
    std::size_t insertion_block = 3;  // encoder blocks before the NPL (1..5)
    Head head = Head::multiview2d;
    CoordMode coord_mode = CoordMode::learned;
    bool orthographic = false;
    std::size_t num_classes = 5;
    // Input geometry; copied from the dataset before building a Network.
    std::size_t raster = 16;
    std::size_t frames = 8;
    std::size_t joints = kJoints;

    bool geometric() const { return head == Head::world3d || head == Head::multiview2d; }
    void validate() const;  // throws std::invalid_argument
};

struct ParamCount {
    std::size_t total = 0;
    std::size_t encoder = 0;
    std::size_t extrinsic_head = 0;
    std::size_t cameras = 0;
    std::size_t classifier = 0;
};

// The full classifier: encoder -> (NPL) -> head. All trainable state lives in
// named Parameters with a stable registration order (checkpoint order).
class Network {
public:
    Network(const ModelConfig& cfg, std::uint64_t seed);

    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;

    struct Forward {
        Var logits;
        // world3d: WorldGrid [C,G,G,G]; multiview2d: ProjectedViews
        // [(N*C),G,G]; repmatch: encoder feature map [C,H,W];
        // baseline_none: invalid.
        Var representation;
    };

    Forward forward(Tape& tape, const ViewRender& view, const DatasetConfig& data_cfg);

    // Encoder output for one view: one fused map (learned) or T per-frame
    // maps (oracle). Each map is [W, H, C+3].
    std::vector<FeatureMap> encode(Tape& tape, const ViewRender& view,
                                   const DatasetConfig& data_cfg);

    const ModelConfig& config() const { return cfg_; }
    std::vector<Parameter*>& parameters() { return params_; }
    std::vector<LearnedCamera>& cameras() { return cameras_; }

    ParamCount count_parameters() const;

private:
    struct ConvParam {
        Parameter* w = nullptr;
        Parameter* b = nullptr;
    };

    Parameter* add_param(const std::string& name, std::vector<std::size_t> shape,
                         double init_std, std::uint64_t seed);
    ConvParam add_conv(const std::string& name, std::vector<std::size_t> wshape,
                       std::uint64_t seed);
    void check_input(const ViewRender& view, const DatasetConfig& data_cfg) const;

    // Learned-mode encoder: fused input -> features [C,H,W] + FeatureMap.
    struct Encoded {
        Var features;
        FeatureMap fm;
    };
    Encoded encode_learned(Tape& tape, const std::vector<FrameRaster>& rasters);
    std::vector<FeatureMap> encode_oracle(Tape& tape,
                                          const std::vector<FrameRaster>& rasters);

    ModelConfig cfg_;
    std::vector<std::unique_ptr<Parameter>> owned_;
    std::vector<ConvParam> enc_blocks_;
    ConvParam coord_head_;             // learned mode
    Parameter* oracle_w_ = nullptr;    // oracle mode
    Parameter* ext_w_ = nullptr;       // geometric heads
    Parameter* ext_b_ = nullptr;
    ConvParam cls_conv1_;              // world3d / multiview2d only
    ConvParam cls_conv2_;
    Parameter* fc_w_ = nullptr;
    Parameter* fc_b_ = nullptr;
    std::vector<LearnedCamera> cameras_;
    std::vector<Parameter*> params_;  // registration order
};

}  // namespace viewgrid
