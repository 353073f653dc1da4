#include "viewgrid/model.hpp"

#include <cmath>
#include <stdexcept>

#include "viewgrid/ops.hpp"
#include "viewgrid/rng.hpp"

namespace viewgrid {

namespace {

// Fixed coordinate ramps concatenated onto classifier inputs. Two strided
// conv blocks followed by global mean pooling are nearly position-blind, and
// where mass sits in the world frame is exactly the signal the geometric
// heads exist to expose; the ramps let the first block form position-aware
// features without adding parameters beyond the widened kernels.
Tensor coord_ramps3(std::size_t g) {
    Tensor r({3, g, g, g});
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t i = 0; i < g; ++i)
            for (std::size_t j = 0; j < g; ++j)
                for (std::size_t k = 0; k < g; ++k) {
                    std::size_t idx[3] = {i, j, k};
                    r[((a * g + i) * g + j) * g + k] =
                        g > 1 ? 2.0 * double(idx[a]) / double(g - 1) - 1.0 : 0.0;
                }
    return r;
}

Tensor coord_ramps2(std::size_t g) {
    Tensor r({2, g, g});
    for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t i = 0; i < g; ++i)
            for (std::size_t j = 0; j < g; ++j) {
                std::size_t idx[2] = {i, j};
                r[(a * g + i) * g + j] =
                    g > 1 ? 2.0 * double(idx[a]) / double(g - 1) - 1.0 : 0.0;
            }
    return r;
}

}  // namespace

const char* head_name(Head h) {
    switch (h) {
        case Head::world3d: return "world3d";
        case Head::multiview2d: return "multiview2d";
        case Head::baseline_none: return "baseline";
        case Head::repmatch: return "repmatch";
    }
    throw std::logic_error("unreachable head");
}

Head head_from_name(const std::string& name) {
    if (name == "world3d") return Head::world3d;
    if (name == "multiview2d") return Head::multiview2d;
    if (name == "baseline" || name == "baseline_none" || name == "none")
        return Head::baseline_none;
    if (name == "repmatch") return Head::repmatch;
    throw std::invalid_argument("unknown head: " + name);
}

const char* coord_mode_name(CoordMode m) {
    return m == CoordMode::learned ? "learned" : "oracle";
}

CoordMode coord_mode_from_name(const std::string& name) {
    if (name == "learned") return CoordMode::learned;
    if (name == "oracle") return CoordMode::oracle;
    throw std::invalid_argument("unknown coord_mode: " + name);
}

void ModelConfig::validate() const {
    if (channels == 0) throw std::invalid_argument("channels must be positive");
    if (grid < 2) throw std::invalid_argument("grid must be at least 2");
    if (insertion_block < 1 || insertion_block > 5)
        throw std::invalid_argument("insertion_block must be in [1,5]");
    if (num_classes == 0) throw std::invalid_argument("num_classes must be positive");
    if (raster < 2) throw std::invalid_argument("raster must be at least 2");
    if (frames == 0) throw std::invalid_argument("frames must be positive");
    if (joints == 0) throw std::invalid_argument("joints must be positive");
    if (geometric() && num_cameras == 0)
        throw std::invalid_argument("geometric heads need at least one camera");
    if (!geometric() && coord_mode == CoordMode::oracle)
        throw std::invalid_argument(
            "coord_mode=oracle requires a geometric head (world3d or multiview2d)");
}

Parameter* Network::add_param(const std::string& name, std::vector<std::size_t> shape,
                              double init_std, std::uint64_t seed) {
    owned_.push_back(std::make_unique<Parameter>(name, Tensor(std::move(shape))));
    Parameter* p = owned_.back().get();
    if (init_std > 0.0) {
        Rng rng(Rng::derive(seed, 1000 + params_.size()));
        double* d = p->value.data();
        for (std::size_t i = 0; i < p->value.size(); ++i) d[i] = rng.normal(0.0, init_std);
    }
    params_.push_back(p);
    return p;
}

Network::ConvParam Network::add_conv(const std::string& name,
                                     std::vector<std::size_t> wshape,
                                     std::uint64_t seed) {
    std::size_t fan_in = 1;
    for (std::size_t i = 1; i < wshape.size(); ++i) fan_in *= wshape[i];
    ConvParam cp;
    std::size_t cout = wshape[0];
    cp.w = add_param(name + ".w", std::move(wshape), 1.0 / std::sqrt(double(fan_in)), seed);
    cp.b = add_param(name + ".b", {cout}, 0.0, seed);
    return cp;
}

Network::Network(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t C = cfg_.channels;
    const std::size_t in_ch = cfg_.frames * cfg_.joints;

    if (cfg_.coord_mode == CoordMode::learned || !cfg_.geometric()) {
        for (std::size_t b = 1; b <= cfg_.insertion_block; ++b) {
            std::size_t cin = (b == 1) ? in_ch : C;
            enc_blocks_.push_back(
                add_conv("encoder.block" + std::to_string(b), {C, cin, 3, 3}, seed));
        }
        coord_head_ = add_conv("encoder.coord", {3, C, 1, 1}, seed);
    } else {
        // Oracle encoder: shared per-frame 1x1 mixing, no bias, so an empty
        // cell maps to an exactly-zero feature vector (no spurious deposits).
        oracle_w_ = add_param("encoder.oracle.w", {C, cfg_.joints, 1, 1},
                              1.0 / std::sqrt(double(cfg_.joints)), seed);
    }

    if (cfg_.geometric()) {
        ext_w_ = add_param("ext_head.w", {6, C}, 1.0 / std::sqrt(double(C)), seed);
        ext_b_ = add_param("ext_head.b", {6}, 0.0, seed);
        cameras_ = init_cameras(cfg_.num_cameras, seed);
        for (auto& cam : cameras_)
            for (Parameter* p : cam.parameters()) params_.push_back(p);

        if (cfg_.head == Head::world3d) {
            cls_conv1_ = add_conv("classifier.conv1", {C, C + 3, 3, 3, 3}, seed);
            cls_conv2_ = add_conv("classifier.conv2", {C, C, 3, 3, 3}, seed);
        } else {
            cls_conv1_ =
                add_conv("classifier.conv1", {C, cfg_.num_cameras * C + 2, 3, 3}, seed);
            cls_conv2_ = add_conv("classifier.conv2", {C, C, 3, 3}, seed);
        }
    }

    fc_w_ = add_param("classifier.fc.w", {cfg_.num_classes, C},
                      1.0 / std::sqrt(double(C)), seed);
    fc_b_ = add_param("classifier.fc.b", {cfg_.num_classes}, 0.0, seed);
}

void Network::check_input(const ViewRender& view, const DatasetConfig& data_cfg) const {
    if (data_cfg.raster != cfg_.raster || data_cfg.frames != cfg_.frames)
        throw std::invalid_argument("dataset geometry does not match model config (raster " +
                                    std::to_string(data_cfg.raster) + " vs " +
                                    std::to_string(cfg_.raster) + ", frames " +
                                    std::to_string(data_cfg.frames) + " vs " +
                                    std::to_string(cfg_.frames) + ")");
    if (view.frames.size() != cfg_.frames)
        throw std::invalid_argument("view has " + std::to_string(view.frames.size()) +
                                    " frames, model expects " + std::to_string(cfg_.frames));
}

Network::Encoded Network::encode_learned(Tape& tape,
                                         const std::vector<FrameRaster>& rasters) {
    const std::size_t H = cfg_.raster, W = cfg_.raster;
    const std::size_t in_ch = cfg_.frames * cfg_.joints;

    // Standardize the occupancy channels: a channel with one lit cell out of
    // H*W has std ~ 1/sqrt(H*W), and at that scale the conv stack stays in
    // tanh's linear regime, where mean pooling erases joint positions. Unit
    // variance keeps the first block honestly nonlinear.
    const double gain = std::sqrt(static_cast<double>(H * W));
    Tensor input({in_ch, H, W});
    double* dst = input.data();
    for (const FrameRaster& fr : rasters) {
        const double* src = fr.feat.data();
        std::size_t n = fr.feat.size();
        for (std::size_t i = 0; i < n; ++i) *dst++ = gain * src[i];
    }

    Var x = tape.constant(input);
    for (auto& blk : enc_blocks_)
        x = ops::tanh(ops::conv2d(x, tape.leaf(*blk.w), tape.leaf(*blk.b), 1, 1));

    // Parameter-free occupancy skip: channel-group means of the raw input,
    // added to the learned features. No weight setting can cancel it, so the
    // features keep a floor of input dependence; the consistency loss can
    // only be lowered by aligning views, never by muting the encoder.
    const std::size_t C = cfg_.channels;
    Tensor skip({C, H, W});
    for (std::size_t c = 0; c < C; ++c) {
        std::size_t lo = c * in_ch / C, hi = (c + 1) * in_ch / C;
        for (std::size_t p = 0; p < H * W; ++p) {
            double s = 0.0;
            for (std::size_t k = lo; k < hi; ++k) s += input[k * H * W + p];
            skip[c * H * W + p] = 0.5 * s / static_cast<double>(hi - lo);
        }
    }
    x = ops::add(x, tape.constant(skip));

    Var coords = ops::conv2d(x, tape.leaf(*coord_head_.w), tape.leaf(*coord_head_.b), 1, 0);

    Var packed = ops::chw_to_whc(ops::concat0({x, coords}));
    return Encoded{x, FeatureMap{packed, W, H, cfg_.channels}};
}

std::vector<FeatureMap> Network::encode_oracle(Tape& tape,
                                               const std::vector<FrameRaster>& rasters) {
    const std::size_t H = cfg_.raster, W = cfg_.raster;
    Tensor zero_bias({cfg_.channels});
    std::vector<FeatureMap> maps;
    maps.reserve(rasters.size());
    for (const FrameRaster& fr : rasters) {
        Var feat = ops::tanh(ops::conv2d(tape.constant(fr.feat), tape.leaf(*oracle_w_),
                                         tape.constant(zero_bias), 1, 0));
        Var coords = tape.constant(fr.coord);
        Var packed = ops::chw_to_whc(ops::concat0({feat, coords}));
        maps.push_back(FeatureMap{packed, W, H, cfg_.channels});
    }
    return maps;
}

std::vector<FeatureMap> Network::encode(Tape& tape, const ViewRender& view,
                                        const DatasetConfig& data_cfg) {
    check_input(view, data_cfg);
    std::vector<FrameRaster> rasters = rasterize(view, data_cfg);
    if (cfg_.coord_mode == CoordMode::oracle && cfg_.geometric())
        return encode_oracle(tape, rasters);
    Encoded enc = encode_learned(tape, rasters);
    return {enc.fm};
}

Network::Forward Network::forward(Tape& tape, const ViewRender& view,
                                  const DatasetConfig& data_cfg) {
    check_input(view, data_cfg);
    std::vector<FrameRaster> rasters = rasterize(view, data_cfg);

    if (!cfg_.geometric()) {
        Encoded enc = encode_learned(tape, rasters);
        Var pooled = ops::l2_normalize(ops::channel_mean(enc.features));
        Var logits = ops::affine(pooled, tape.leaf(*fc_w_), tape.leaf(*fc_b_));
        Forward out;
        out.logits = logits;
        if (cfg_.head == Head::repmatch)
            out.representation = tape.constant(enc.features.value());  // see note below
        return out;
    }

    // The consistency representation is rebuilt on a frozen copy of the
    // encoder output: its loss reaches only the coordinate and extrinsic
    // heads, while the trunk stays owned by the classification loss. Any
    // live path from the consistency term into the trunk lets the encoder
    // mute itself to satisfy consistency cheaply, which starves the
    // classifier.
    const std::size_t G = cfg_.grid;
    Var grid;       // [C,G,G,G]
    Var world;      // [n,3]
    Var all_feats;  // [n,C]
    Var rep;        // world grid rebuilt over the frozen encoder output
    double n_points;
    if (cfg_.coord_mode == CoordMode::learned) {
        Encoded enc = encode_learned(tape, rasters);
        Var pooled = ops::l2_normalize(ops::channel_mean(enc.features));
        npl::ExtrinsicEstimate ext = npl::extrinsic_head(pooled, *ext_w_, *ext_b_);
        npl::ScatterResult sr = npl::scatter_world(enc.fm, ext, cfg_.grid, cfg_.coord_mode);
        n_points = static_cast<double>(cfg_.raster * cfg_.raster);
        grid = ops::scale(sr.grid, double(G * G * G) / n_points);
        world = sr.world_points;
        all_feats = enc.fm.features();

        Var x_det = tape.constant(enc.features.value());
        Var coords_det = ops::conv2d(x_det, tape.leaf(*coord_head_.w),
                                     tape.leaf(*coord_head_.b), 1, 0);
        Var packed_det = ops::chw_to_whc(ops::concat0({x_det, coords_det}));
        FeatureMap fm_det{packed_det, cfg_.raster, cfg_.raster, cfg_.channels};
        npl::ExtrinsicEstimate ext_det =
            npl::extrinsic_head(tape.constant(pooled.value()), *ext_w_, *ext_b_);
        npl::ScatterResult sr_det =
            npl::scatter_world(fm_det, ext_det, cfg_.grid, cfg_.coord_mode);
        rep = ops::scale(sr_det.grid, double(G * G * G) / n_points);
    } else {
        std::vector<FeatureMap> maps = encode_oracle(tape, rasters);
        npl::ExtrinsicEstimate ext = npl::oracle_extrinsics(tape, view.extrinsics);
        std::vector<Var> worlds, feats;
        for (const FeatureMap& fm : maps) {
            npl::ScatterResult sr = npl::scatter_world(fm, ext, cfg_.grid, cfg_.coord_mode);
            grid = grid.valid() ? ops::add(grid, sr.grid) : sr.grid;
            worlds.push_back(sr.world_points);
            feats.push_back(fm.features());
        }
        world = ops::concat0(worlds);
        all_feats = ops::concat0(feats);
        n_points = static_cast<double>(maps.size() * cfg_.raster * cfg_.raster);
        grid = ops::scale(grid, double(G * G * G) / n_points);
        rep = tape.constant(grid.value());  // oracle geometry is constant too
    }
    // Scatter outputs are normalized by point density per cell, not by point
    // count: occupied cells then sit at O(1), inside the classifier's usable
    // nonlinear range. Scaling by 1/n instead leaves cells at ~1e-3, where
    // the conv stack is effectively linear and mean pooling collapses the
    // grid to per-channel totals, which scatter conservation makes
    // geometry-invariant: the classifier would be blind to placement.

    Forward out;
    out.representation = rep;
    if (cfg_.head == Head::world3d) {
        Var h_in = ops::concat0({grid, tape.constant(coord_ramps3(G))});
        Var h = ops::tanh(ops::conv3d(h_in, tape.leaf(*cls_conv1_.w),
                                      tape.leaf(*cls_conv1_.b), 2, 1));
        h = ops::tanh(ops::conv3d(h, tape.leaf(*cls_conv2_.w), tape.leaf(*cls_conv2_.b), 2, 1));
        out.logits = ops::affine(ops::l2_normalize(ops::channel_mean(h)), tape.leaf(*fc_w_), tape.leaf(*fc_b_));
    } else {
        Var pv = ops::scale(npl::project_views(world, all_feats, cameras_, cfg_.grid,
                                               cfg_.orthographic, cfg_.coord_mode),
                            double(G * G) / n_points);
        Var pv_in = ops::concat0({pv, tape.constant(coord_ramps2(G))});
        Var h = ops::tanh(ops::conv2d(pv_in, tape.leaf(*cls_conv1_.w),
                                      tape.leaf(*cls_conv1_.b), 2, 1));
        h = ops::tanh(ops::conv2d(h, tape.leaf(*cls_conv2_.w), tape.leaf(*cls_conv2_.b), 2, 1));
        out.logits = ops::affine(ops::l2_normalize(ops::channel_mean(h)), tape.leaf(*fc_w_), tape.leaf(*fc_b_));
    }
    return out;
}

ParamCount Network::count_parameters() const {
    ParamCount pc;
    for (const Parameter* p : params_) {
        std::size_t n = p->value.size();
        pc.total += n;
        if (p->name.rfind("encoder.", 0) == 0) pc.encoder += n;
        else if (p->name.rfind("ext_head.", 0) == 0) pc.extrinsic_head += n;
        else if (p->name.rfind("camera", 0) == 0) pc.cameras += n;
        else if (p->name.rfind("classifier.", 0) == 0) pc.classifier += n;
    }
    return pc;
}

}  // namespace viewgrid
