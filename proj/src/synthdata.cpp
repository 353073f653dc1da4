#include "viewgrid/synthdata.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "json.hpp"
#include "viewgrid/rng.hpp"

namespace viewgrid {

namespace {

constexpr double kPi = std::numbers::pi;

// Base skeleton, x right / y up / z depth, all in the frontal plane.
// Index order: head, neck, pelvis, L/R shoulder, L/R elbow, L/R wrist,
// L/R knee, L/R ankle.
// Stooped stance: depth grows with height above the ankles, so every joint
// carries a distinct turning radius about the body's vertical axis.
const std::array<Vec3, kJoints> kBasePose = {{
    {0.00, 0.62, 0.440},   // 0 head
    {0.00, 0.42, 0.377},   // 1 neck
    {0.00, -0.12, 0.207},  // 2 pelvis
    {-0.26, 0.38, 0.365},  // 3 l_shoulder
    {0.26, 0.38, 0.365},   // 4 r_shoulder
    {-0.42, 0.14, 0.289},  // 5 l_elbow
    {0.42, 0.14, 0.289},   // 6 r_elbow
    {-0.58, -0.08, 0.220}, // 7 l_wrist
    {0.58, -0.08, 0.220},  // 8 r_wrist
    {-0.14, -0.44, 0.107}, // 9 l_knee
    {0.14, -0.44, 0.107},  // 10 r_knee
    {-0.16, -0.78, 0.000}, // 11 l_ankle
    {0.16, -0.78, 0.000},  // 12 r_ankle
}};

enum JointId {
    kHead, kNeck, kPelvis, kLShoulder, kRShoulder, kLElbow, kRElbow,
    kLWrist, kRWrist, kLKnee, kRKnee, kLAnkle, kRAnkle
};

std::vector<std::vector<Vec3>> base_frames(const SampleJitter& jit) {
    std::vector<std::vector<Vec3>> frames(kFrames);
    for (auto& f : frames) {
        f.assign(kBasePose.begin(), kBasePose.end());
        for (Vec3& p : f)
            for (int a = 0; a < 3; ++a) p[a] += jit.offset[a];
    }
    return frames;
}

double frac(std::size_t t) { return static_cast<double>(t) / static_cast<double>(kFrames - 1); }

// "raise": the right arm ascends monotonically, the wrist drifting toward
// the body midline as it climbs, with a small lateral flutter. Identical to
// "wave" except for the horizontal direction of travel, so the pair forms a
// screen-space mirror twin: same joints, same vertical profile, same flutter
// magnitude, opposite sweep.
std::vector<std::vector<Vec3>> traj_raise(const SampleJitter& jit) {
    auto frames = base_frames(jit);
    for (std::size_t t = 0; t < kFrames; ++t) {
        double u = jit.amplitude * std::sin(0.5 * kPi * frac(t));
        double w = jit.amplitude * std::sin(2.0 * kPi * frac(t));
        frames[t][kRElbow][1] += 0.06 * u;
        frames[t][kRWrist][0] += -0.12 * u + 0.06 * w;
        frames[t][kRWrist][1] += 0.30 * u;
    }
    return frames;
}

// "squat": every joint descends then ascends; first and last frames match.
std::vector<std::vector<Vec3>> traj_squat(const SampleJitter& jit) {
    auto frames = base_frames(jit);
    auto depth = [](std::size_t j) {
        switch (j) {
            case kPelvis: return 0.14;
            case kLKnee: case kRKnee: return 0.07;
            case kLAnkle: case kRAnkle: return 0.02;
            default: return 0.26;  // head through wrists move together
        }
    };
    for (std::size_t t = 0; t < kFrames; ++t) {
        double s = jit.amplitude * std::sin(kPi * frac(t));
        for (std::size_t j = 0; j < kJoints; ++j) frames[t][j][1] -= depth(j) * s;
    }
    return frames;
}

// "wave": the right arm sweeps outward and up, the wrist oscillating
// laterally on the way. Horizontal mirror of "raise" about the wrist's rest
// column; see the note there.
std::vector<std::vector<Vec3>> traj_wave(const SampleJitter& jit) {
    auto frames = base_frames(jit);
    for (std::size_t t = 0; t < kFrames; ++t) {
        double u = jit.amplitude * std::sin(0.5 * kPi * frac(t));
        double w = jit.amplitude * std::sin(2.0 * kPi * frac(t));
        frames[t][kRElbow][1] += 0.06 * u;
        frames[t][kRWrist][0] += 0.12 * u - 0.06 * w;
        frames[t][kRWrist][1] += 0.30 * u;
    }
    return frames;
}

// "spin": the whole body rotates about the vertical axis through its center.
std::vector<std::vector<Vec3>> traj_spin(const SampleJitter& jit) {
    auto frames = base_frames(jit);
    double total = -30.0 * kPi / 180.0;
    for (std::size_t t = 0; t < kFrames; ++t) {
        double a = jit.amplitude * total * frac(t);
        double c = std::cos(a), s = std::sin(a);
        for (std::size_t j = 0; j < kJoints; ++j) {
            double x = frames[t][j][0] - jit.offset[0];
            double z = frames[t][j][2] - jit.offset[2];
            frames[t][j][0] = jit.offset[0] + c * x + s * z;
            frames[t][j][2] = jit.offset[2] - s * x + c * z;
        }
    }
    return frames;
}

// "lean": upper joints shear sideways in proportion to the stance depth (most
// at the head) with a slight outward splay of the wide joints; the per-joint
// paths mirror "spin" in the horizontal axis.
std::vector<std::vector<Vec3>> traj_lean(const SampleJitter& jit) {
    auto frames = base_frames(jit);
    double total = 30.0 * kPi / 180.0;
    for (std::size_t t = 0; t < kFrames; ++t) {
        double a = jit.amplitude * total * frac(t);
        for (std::size_t j = 0; j < kJoints; ++j)
            frames[t][j][0] += kBasePose[j][2] * std::sin(a) +
                               kBasePose[j][0] * (1.0 - std::cos(a));
    }
    return frames;
}

}  // namespace

const std::vector<ActionClass>& class_library() {
    static const std::vector<ActionClass> lib = {
        {0, "raise", traj_raise}, {1, "squat", traj_squat}, {2, "wave", traj_wave},
        {3, "spin", traj_spin},   {4, "lean", traj_lean},
    };
    return lib;
}

std::vector<const Sample*> Dataset::split(const std::string& name) const {
    std::vector<const Sample*> out;
    for (const Sample& s : samples)
        if (s.split == name) out.push_back(&s);
    return out;
}

namespace {

constexpr int kResampleBudget = 500;

double deg(double d) { return d * kPi / 180.0; }

struct CellIndex {
    std::size_t i, j;
    bool ok;
};

CellIndex to_cell(double x, double y, std::size_t raster) {
    double n = static_cast<double>(raster - 1);
    double ci = (x + 1.0) / 2.0 * n;
    double cj = (y + 1.0) / 2.0 * n;
    long i = std::lround(ci), j = std::lround(cj);
    bool ok = i >= 0 && j >= 0 && i < static_cast<long>(raster) && j < static_cast<long>(raster);
    return CellIndex{static_cast<std::size_t>(i < 0 ? 0 : i),
                     static_cast<std::size_t>(j < 0 ? 0 : j), ok};
}

// Renders one view; returns false on a frame exit or a same-frame cell clash.
bool render_view(const std::vector<std::vector<Vec3>>& world, const EulerAngles& angles,
                 const Vec3& translation, const DatasetConfig& cfg, ViewRender& out) {
    out.angles = angles;
    out.extrinsics = Extrinsics{rotation_from_euler(angles), translation};
    out.frames.assign(cfg.frames, {});
    for (std::size_t t = 0; t < cfg.frames; ++t) {
        std::vector<std::size_t> occupied;  // flat cell ids this frame
        for (std::size_t j = 0; j < kJoints; ++j) {
            Vec3 pc = world_to_camera(world[t][j], out.extrinsics);
            CellIndex c = to_cell(pc[0], pc[1], cfg.raster);
            if (!c.ok) return false;
            std::size_t flat = c.i * cfg.raster + c.j;
            for (std::size_t o : occupied)
                if (o == flat) return false;
            occupied.push_back(flat);
            Cell cell;
            cell.i = c.i;
            cell.j = c.j;
            cell.coord = pc;  // noise added after acceptance
            cell.feat.assign(kJoints, 0.0);
            cell.feat[j] = static_cast<double>(t + 1) / static_cast<double>(cfg.frames);
            out.frames[t].push_back(std::move(cell));
        }
    }
    return true;
}

}  // namespace

void validate_dataset_config(const DatasetConfig& cfg) {
    if (cfg.num_classes == 0 || cfg.num_classes > class_library().size())
        throw std::invalid_argument("num_classes must be in 1..5");
    if (cfg.frames != kFrames) throw std::invalid_argument("frames must be 8");
    if (cfg.raster < 4) throw std::invalid_argument("raster too small (minimum 4)");
    if (cfg.samples_per_class == 0)
        throw std::invalid_argument("samples_per_class must be positive");
    if (cfg.train_views == 0 || cfg.test_views == 0)
        throw std::invalid_argument("train_views and test_views must be positive");
    bool overlap = !(cfg.unseen_yaw_min_deg > cfg.seen_yaw_max_deg ||
                     cfg.unseen_yaw_max_deg < cfg.seen_yaw_min_deg);
    if (overlap)
        throw std::invalid_argument(
            "seen_yaw_[min,max]_deg and unseen_yaw_[min,max]_deg ranges overlap");
}

Dataset generate_dataset(const DatasetConfig& cfg) {
    validate_dataset_config(cfg);

    const std::vector<ActionClass>& lib = class_library();
    static const char* kSplits[] = {"train-seen", "test-seen", "test-unseen"};

    Dataset ds;
    ds.config = cfg;
    for (std::size_t si = 0; si < 3; ++si) {
        bool unseen = si == 2;
        std::size_t views = si == 0 ? cfg.train_views : cfg.test_views;
        for (std::size_t c = 0; c < cfg.num_classes; ++c) {
            for (std::size_t k = 0; k < cfg.samples_per_class; ++k) {
                std::uint64_t stream =
                    (static_cast<std::uint64_t>(si) << 40) |
                    (static_cast<std::uint64_t>(c) << 20) | static_cast<std::uint64_t>(k);
                Rng rng = Rng::derive(cfg.seed, stream);
                Sample sample;
                sample.class_id = lib[c].id;
                sample.split = kSplits[si];
                bool ok = false;
                for (int attempt = 0; attempt < kResampleBudget && !ok; ++attempt) {
                    SampleJitter jit;
                    jit.amplitude = rng.uniform(0.7, 1.3);
                    for (int a = 0; a < 3; ++a)
                        jit.offset[a] = rng.uniform(-0.05, 0.05);
                    auto world = lib[c].trajectory(jit);
                    std::vector<ViewRender> renders(views);
                    bool all = true;
                    for (std::size_t v = 0; v < views && all; ++v) {
                        EulerAngles ang;
                        ang.yaw = unseen ? deg(rng.uniform(cfg.unseen_yaw_min_deg,
                                                           cfg.unseen_yaw_max_deg))
                                         : deg(rng.uniform(cfg.seen_yaw_min_deg,
                                                           cfg.seen_yaw_max_deg));
                        ang.pitch = deg(rng.uniform(-cfg.pitch_jitter_deg,
                                                    cfg.pitch_jitter_deg));
                        ang.roll = 0.0;
                        Vec3 tr;
                        for (int a = 0; a < 3; ++a)
                            tr[a] = rng.uniform(-cfg.translation_jitter,
                                                cfg.translation_jitter);
                        all = render_view(world, ang, tr, cfg, renders[v]);
                    }
                    if (!all) continue;
                    for (ViewRender& r : renders)
                        for (auto& frame : r.frames)
                            for (Cell& cell : frame)
                                for (int a = 0; a < 3; ++a)
                                    cell.coord[a] += cfg.sigma * rng.normal();
                    sample.world = std::move(world);
                    sample.views = std::move(renders);
                    ok = true;
                }
                if (!ok)
                    throw std::runtime_error("generate_dataset: no feasible render for " +
                                             std::string(kSplits[si]) + "/" + lib[c].name +
                                             "/" + std::to_string(k) + " within " +
                                             std::to_string(kResampleBudget) + " attempts");
                ds.samples.push_back(std::move(sample));
            }
        }
    }
    return ds;
}

using nlohmann::ordered_json;

ordered_json dataset_config_to_json(const DatasetConfig& c) {
    return ordered_json{{"num_classes", c.num_classes},
                        {"samples_per_class", c.samples_per_class},
                        {"raster", c.raster},
                        {"frames", c.frames},
                        {"train_views", c.train_views},
                        {"test_views", c.test_views},
                        {"seen_yaw_min_deg", c.seen_yaw_min_deg},
                        {"seen_yaw_max_deg", c.seen_yaw_max_deg},
                        {"unseen_yaw_min_deg", c.unseen_yaw_min_deg},
                        {"unseen_yaw_max_deg", c.unseen_yaw_max_deg},
                        {"pitch_jitter_deg", c.pitch_jitter_deg},
                        {"translation_jitter", c.translation_jitter},
                        {"sigma", c.sigma},
                        {"seed", c.seed}};
}

DatasetConfig dataset_config_from_json(const ordered_json& j) {
    DatasetConfig c;
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.samples_per_class = j.at("samples_per_class").get<std::size_t>();
    c.raster = j.at("raster").get<std::size_t>();
    c.frames = j.at("frames").get<std::size_t>();
    c.train_views = j.at("train_views").get<std::size_t>();
    c.test_views = j.at("test_views").get<std::size_t>();
    c.seen_yaw_min_deg = j.at("seen_yaw_min_deg").get<double>();
    c.seen_yaw_max_deg = j.at("seen_yaw_max_deg").get<double>();
    c.unseen_yaw_min_deg = j.at("unseen_yaw_min_deg").get<double>();
    c.unseen_yaw_max_deg = j.at("unseen_yaw_max_deg").get<double>();
    c.pitch_jitter_deg = j.at("pitch_jitter_deg").get<double>();
    c.translation_jitter = j.at("translation_jitter").get<double>();
    c.sigma = j.at("sigma").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

void write_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_dataset: cannot open " + path);
    ordered_json header{{"format", "viewgrid-ds"},
                        {"version", 1},
                        {"config", dataset_config_to_json(ds.config)}};
    out << header.dump() << "\n";
    for (const Sample& s : ds.samples) {
        ordered_json views = ordered_json::array();
        for (const ViewRender& v : s.views) {
            ordered_json frames = ordered_json::array();
            for (const auto& frame : v.frames) {
                ordered_json cells = ordered_json::array();
                for (const Cell& c : frame)
                    cells.push_back(ordered_json::array(
                        {c.i, c.j, ordered_json{c.coord[0], c.coord[1], c.coord[2]},
                         ordered_json(c.feat)}));
                frames.push_back(std::move(cells));
            }
            views.push_back(ordered_json{
                {"yaw", v.angles.yaw},
                {"pitch", v.angles.pitch},
                {"roll", v.angles.roll},
                {"t", ordered_json{v.extrinsics.translation[0], v.extrinsics.translation[1],
                                   v.extrinsics.translation[2]}},
                {"frames", std::move(frames)}});
        }
        ordered_json world = ordered_json::array();
        for (const auto& frame : s.world) {
            ordered_json fj = ordered_json::array();
            for (const Vec3& p : frame) fj.push_back(ordered_json{p[0], p[1], p[2]});
            world.push_back(std::move(fj));
        }
        ordered_json line{{"class", s.class_id},
                          {"split", s.split},
                          {"world", std::move(world)},
                          {"views", std::move(views)}};
        out << line.dump() << "\n";
    }
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_dataset: cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    auto parse_line = [&](const std::string& text) {
        try {
            return ordered_json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error("read_dataset: parse error at line " +
                                     std::to_string(lineno) + ": " + e.what());
        }
    };
    if (!std::getline(in, line))
        throw std::runtime_error("read_dataset: empty file " + path);
    ++lineno;
    ordered_json header = parse_line(line);
    if (!header.contains("format") || header["format"] != "viewgrid-ds")
        throw std::runtime_error("read_dataset: not a viewgrid-ds file");
    if (!header.contains("version") || header["version"].get<int>() != 1)
        throw std::runtime_error("read_dataset: unsupported version " +
                                 header.value("version", ordered_json()).dump());

    Dataset ds;
    ds.config = dataset_config_from_json(header.at("config"));
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ordered_json j = parse_line(line);
        try {
            Sample s;
            s.class_id = j.at("class").get<int>();
            s.split = j.at("split").get<std::string>();
            for (const auto& fj : j.at("world")) {
                std::vector<Vec3> frame;
                for (const auto& pj : fj)
                    frame.push_back(Vec3{pj.at(0).get<double>(), pj.at(1).get<double>(),
                                         pj.at(2).get<double>()});
                s.world.push_back(std::move(frame));
            }
            for (const auto& vj : j.at("views")) {
                ViewRender v;
                v.angles.yaw = vj.at("yaw").get<double>();
                v.angles.pitch = vj.at("pitch").get<double>();
                v.angles.roll = vj.at("roll").get<double>();
                v.extrinsics.rotation = rotation_from_euler(v.angles);
                v.extrinsics.translation = Vec3{vj.at("t").at(0).get<double>(),
                                                vj.at("t").at(1).get<double>(),
                                                vj.at("t").at(2).get<double>()};
                for (const auto& fj : vj.at("frames")) {
                    std::vector<Cell> cells;
                    for (const auto& cj : fj) {
                        Cell c;
                        c.i = cj.at(0).get<std::size_t>();
                        c.j = cj.at(1).get<std::size_t>();
                        c.coord = Vec3{cj.at(2).at(0).get<double>(),
                                       cj.at(2).at(1).get<double>(),
                                       cj.at(2).at(2).get<double>()};
                        c.feat = cj.at(3).get<std::vector<double>>();
                        cells.push_back(std::move(c));
                    }
                    v.frames.push_back(std::move(cells));
                }
                s.views.push_back(std::move(v));
            }
            ds.samples.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("read_dataset: malformed sample at line " +
                                     std::to_string(lineno) + ": " + e.what());
        }
    }
    return ds;
}

std::vector<FrameRaster> rasterize(const ViewRender& view, const DatasetConfig& cfg) {
    std::vector<FrameRaster> out;
    out.reserve(view.frames.size());
    std::size_t w = cfg.raster, h = cfg.raster;
    for (const auto& frame : view.frames) {
        FrameRaster r{Tensor({kJoints, h, w}), Tensor({3, h, w})};
        for (const Cell& c : frame) {
            if (c.i >= w || c.j >= h || c.feat.size() != kJoints)
                throw std::runtime_error("rasterize: malformed cell record");
            for (std::size_t ch = 0; ch < kJoints; ++ch)
                r.feat[(ch * h + c.j) * w + c.i] = c.feat[ch];
            for (std::size_t a = 0; a < 3; ++a)
                r.coord[(a * h + c.j) * w + c.i] = c.coord[a];
        }
        out.push_back(std::move(r));
    }
    return out;
}

double nearest_centroid_accuracy(const Dataset& ds, const std::string& split) {
    auto train = ds.split("train-seen");
    if (train.empty()) throw std::runtime_error("nearest_centroid_accuracy: no train split");
    std::size_t dim = ds.config.frames * kJoints * 3;
    auto flatten = [&](const Sample& s) {
        std::vector<double> v;
        v.reserve(dim);
        for (const auto& frame : s.world)
            for (const Vec3& p : frame)
                for (int a = 0; a < 3; ++a) v.push_back(p[a]);
        return v;
    };
    std::vector<std::vector<double>> centroid(ds.config.num_classes,
                                              std::vector<double>(dim, 0.0));
    std::vector<std::size_t> count(ds.config.num_classes, 0);
    for (const Sample* s : train) {
        auto v = flatten(*s);
        auto& c = centroid[static_cast<std::size_t>(s->class_id)];
        for (std::size_t i = 0; i < dim; ++i) c[i] += v[i];
        ++count[static_cast<std::size_t>(s->class_id)];
    }
    for (std::size_t c = 0; c < centroid.size(); ++c)
        if (count[c] > 0)
            for (double& x : centroid[c]) x /= static_cast<double>(count[c]);

    auto eval = ds.split(split);
    if (eval.empty()) throw std::runtime_error("nearest_centroid_accuracy: empty split");
    std::size_t correct = 0;
    for (const Sample* s : eval) {
        auto v = flatten(*s);
        double best = 0.0;
        std::size_t best_c = 0;
        for (std::size_t c = 0; c < centroid.size(); ++c) {
            double d = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                double diff = v[i] - centroid[c][i];
                d += diff * diff;
            }
            if (c == 0 || d < best) {
                best = d;
                best_c = c;
            }
        }
        if (static_cast<int>(best_c) == s->class_id) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(eval.size());
}

}  // namespace viewgrid
