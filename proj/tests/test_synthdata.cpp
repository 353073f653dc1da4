#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "viewgrid/synthdata.hpp"

using namespace viewgrid;

namespace {

constexpr double kTestPi = 3.14159265358979323846;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

DatasetConfig tiny_cfg() {
    DatasetConfig cfg;
    cfg.samples_per_class = 2;
    cfg.seed = 42;
    return cfg;
}

}  // namespace

TEST_CASE("class library shape and names") {
    const auto& lib = class_library();
    REQUIRE(lib.size() == 5);
    CHECK(lib[0].name == "raise");
    CHECK(lib[1].name == "squat");
    CHECK(lib[2].name == "wave");
    CHECK(lib[3].name == "spin");
    CHECK(lib[4].name == "lean");
    for (const auto& ac : lib) {
        auto frames = ac.trajectory(SampleJitter{});
        REQUIRE(frames.size() == kFrames);
        for (const auto& f : frames) {
            REQUIRE(f.size() == kJoints);
            for (const Vec3& p : f)
                for (int a = 0; a < 3; ++a) {
                    CHECK(p[a] >= -1.0);
                    CHECK(p[a] <= 1.0);
                }
        }
    }
}

TEST_CASE("squat closes its cycle") {
    auto frames = class_library()[1].trajectory(SampleJitter{});
    for (std::size_t j = 0; j < kJoints; ++j)
        for (int a = 0; a < 3; ++a)
            CHECK(std::abs(frames[0][j][a] - frames[kFrames - 1][j][a]) < 1e-15);
}

TEST_CASE("spin frames are pure rotations of frame 0") {
    auto frames = class_library()[3].trajectory(SampleJitter{});
    // Fit the in-plane rotation from the widest-radius joint, then demand
    // every joint follows it.
    std::size_t ref = 0;
    double best = 0.0;
    for (std::size_t j = 0; j < kJoints; ++j) {
        double r2 = frames[0][j][0] * frames[0][j][0] + frames[0][j][2] * frames[0][j][2];
        if (r2 > best) {
            best = r2;
            ref = j;
        }
    }
    for (std::size_t t = 0; t < kFrames; ++t) {
        double x0 = frames[0][ref][0], z0 = frames[0][ref][2];
        double xt = frames[t][ref][0], zt = frames[t][ref][2];
        double r2 = x0 * x0 + z0 * z0;
        double c = (x0 * xt + z0 * zt) / r2;
        double s = (xt * z0 - zt * x0) / r2;
        CHECK(std::abs(c * c + s * s - 1.0) < 1e-12);
        for (std::size_t j = 0; j < kJoints; ++j) {
            double x = frames[0][j][0], z = frames[0][j][2];
            CHECK(std::abs(frames[t][j][0] - (c * x + s * z)) < 1e-12);
            CHECK(std::abs(frames[t][j][2] - (-s * x + c * z)) < 1e-12);
            CHECK(frames[t][j][1] == frames[0][j][1]);  // height untouched
        }
    }
}

TEST_CASE("all class pairs differ by L-inf >= 0.2 on some joint path") {
    const auto& lib = class_library();
    std::vector<std::vector<std::vector<Vec3>>> traj;
    for (const auto& ac : lib) traj.push_back(ac.trajectory(SampleJitter{}));
    for (std::size_t a = 0; a < lib.size(); ++a)
        for (std::size_t b = a + 1; b < lib.size(); ++b) {
            double linf = 0.0;
            for (std::size_t t = 0; t < kFrames; ++t)
                for (std::size_t j = 0; j < kJoints; ++j)
                    for (int ax = 0; ax < 3; ++ax)
                        linf = std::max(linf,
                                        std::abs(traj[a][t][j][ax] - traj[b][t][j][ax]));
            INFO(lib[a].name, " vs ", lib[b].name, ": ", linf);
            CHECK(linf >= 0.2);
        }
}

TEST_CASE("generation is deterministic in the config") {
    Dataset d1 = generate_dataset(tiny_cfg());
    Dataset d2 = generate_dataset(tiny_cfg());
    REQUIRE(d1.samples.size() == d2.samples.size());
    for (std::size_t i = 0; i < d1.samples.size(); ++i) {
        const Sample& a = d1.samples[i];
        const Sample& b = d2.samples[i];
        CHECK(a.class_id == b.class_id);
        CHECK(a.split == b.split);
        REQUIRE(a.views.size() == b.views.size());
        CHECK(a.views[0].angles.yaw == b.views[0].angles.yaw);
        for (std::size_t t = 0; t < kFrames; ++t)
            for (std::size_t j = 0; j < kJoints; ++j)
                for (int ax = 0; ax < 3; ++ax)
                    CHECK(a.world[t][j][ax] == b.world[t][j][ax]);
    }

    // byte-identical files too
    std::string p1 = "sd_det_1.jsonl", p2 = "sd_det_2.jsonl";
    write_dataset(d1, p1);
    write_dataset(d2, p2);
    CHECK(slurp(p1) == slurp(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("splits carry disjoint camera yaw bands") {
    Dataset ds = generate_dataset(tiny_cfg());
    const double deg = 180.0 / kTestPi;
    for (const Sample& s : ds.samples)
        for (const ViewRender& v : s.views) {
            double yaw = v.angles.yaw * deg;
            if (s.split == "test-unseen") {
                CHECK(yaw >= 150.0);
                CHECK(yaw <= 210.0);
            } else {
                CHECK(yaw >= -30.0);
                CHECK(yaw <= 30.0);
            }
        }
}

TEST_CASE("sigma=0 identity camera reproduces world coordinates") {
    DatasetConfig cfg = tiny_cfg();
    cfg.sigma = 0.0;
    cfg.seen_yaw_min_deg = cfg.seen_yaw_max_deg = 0.0;
    cfg.unseen_yaw_min_deg = cfg.unseen_yaw_max_deg = 180.0;
    cfg.pitch_jitter_deg = 0.0;
    cfg.translation_jitter = 0.0;
    Dataset ds = generate_dataset(cfg);

    const Sample* s = ds.split("train-seen").front();
    const ViewRender& v = s->views.front();
    for (int i = 0; i < 9; ++i)
        CHECK(v.extrinsics.rotation[i] == ((i % 4 == 0) ? 1.0 : 0.0));
    for (std::size_t t = 0; t < kFrames; ++t)
        for (const Cell& cell : v.frames[t]) {
            // joint id = the one-hot slot; phase scaling identifies the frame
            std::size_t j = 0;
            while (j < kJoints && cell.feat[j] == 0.0) ++j;
            REQUIRE(j < kJoints);
            CHECK(cell.feat[j] ==
                  doctest::Approx(double(t + 1) / double(kFrames)).epsilon(1e-15));
            for (int ax = 0; ax < 3; ++ax)
                CHECK(cell.coord[ax] == s->world[t][j][ax]);
        }
}

TEST_CASE("two views agree after undoing their extrinsics (sigma=0)") {
    DatasetConfig cfg = tiny_cfg();
    cfg.sigma = 0.0;
    Dataset ds = generate_dataset(cfg);
    const Sample* s = ds.split("train-seen").front();
    REQUIRE(s->views.size() >= 2);
    for (std::size_t t = 0; t < kFrames; ++t) {
        // Key the recovered points by joint id (the one-hot slot) so the
        // comparison does not depend on any ordering of the cells.
        std::vector<Vec3> pts[2];
        for (int vi = 0; vi < 2; ++vi) {
            const ViewRender& v = s->views[vi];
            pts[vi].assign(kJoints, Vec3{});
            REQUIRE(v.frames[t].size() == kJoints);
            for (const Cell& cell : v.frames[t]) {
                std::size_t j = 0;
                while (j < kJoints && cell.feat[j] == 0.0) ++j;
                REQUIRE(j < kJoints);
                pts[vi][j] = camera_to_world(cell.coord, v.extrinsics);
            }
        }
        for (std::size_t j = 0; j < kJoints; ++j)
            for (int ax = 0; ax < 3; ++ax)
                CHECK(pts[0][j][ax] == doctest::Approx(pts[1][j][ax]).epsilon(1e-12));
    }
}

TEST_CASE("nearest-centroid separability floor") {
    DatasetConfig cfg;  // default config, the documented floor
    Dataset ds = generate_dataset(cfg);
    CHECK(nearest_centroid_accuracy(ds, "train-seen") == 1.0);
    CHECK(nearest_centroid_accuracy(ds, "test-seen") == 1.0);
    CHECK(nearest_centroid_accuracy(ds, "test-unseen") == 1.0);
}

TEST_CASE("dataset file round trip") {
    Dataset ds = generate_dataset(tiny_cfg());
    std::string path = "sd_round.jsonl";
    write_dataset(ds, path);
    Dataset back = read_dataset(path);

    CHECK(back.config.seed == ds.config.seed);
    CHECK(back.config.samples_per_class == ds.config.samples_per_class);
    REQUIRE(back.samples.size() == ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const Sample& a = ds.samples[i];
        const Sample& b = back.samples[i];
        CHECK(a.class_id == b.class_id);
        CHECK(a.split == b.split);
        for (std::size_t t = 0; t < kFrames; ++t)
            for (std::size_t j = 0; j < kJoints; ++j)
                for (int ax = 0; ax < 3; ++ax)
                    CHECK(a.world[t][j][ax] == b.world[t][j][ax]);
        REQUIRE(a.views.size() == b.views.size());
        for (std::size_t vi = 0; vi < a.views.size(); ++vi) {
            CHECK(a.views[vi].angles.yaw == b.views[vi].angles.yaw);
            for (std::size_t t = 0; t < kFrames; ++t) {
                REQUIRE(a.views[vi].frames[t].size() == b.views[vi].frames[t].size());
                for (std::size_t c = 0; c < a.views[vi].frames[t].size(); ++c) {
                    const Cell& ca = a.views[vi].frames[t][c];
                    const Cell& cb = b.views[vi].frames[t][c];
                    CHECK(ca.i == cb.i);
                    CHECK(ca.j == cb.j);
                    for (int ax = 0; ax < 3; ++ax) CHECK(ca.coord[ax] == cb.coord[ax]);
                    CHECK(ca.feat == cb.feat);
                }
            }
        }
    }
    std::remove(path.c_str());
}

TEST_CASE("read_dataset error paths") {
    Dataset ds = generate_dataset(tiny_cfg());
    std::string path = "sd_err.jsonl";
    write_dataset(ds, path);

    SUBCASE("truncated file") {
        std::string all = slurp(path);
        std::size_t cut = all.size() * 3 / 5;
        if (all[cut - 1] == '\n') ++cut;  // land mid-line, not on a boundary
        std::ofstream out(path, std::ios::binary);
        out << all.substr(0, cut);
        out.close();
        try {
            read_dataset(path);
            FAIL("expected a parse error");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("line") != std::string::npos);
        }
    }
    SUBCASE("version mismatch") {
        std::string all = slurp(path);
        std::size_t pos = all.find("\"version\":1");
        REQUIRE(pos != std::string::npos);
        all.replace(pos, 11, "\"version\":9");
        std::ofstream out(path, std::ios::binary);
        out << all;
        out.close();
        CHECK_THROWS_AS(read_dataset(path), std::runtime_error);
    }
    SUBCASE("missing file") { CHECK_THROWS(read_dataset("no_such_file.jsonl")); }
    std::remove(path.c_str());
}

TEST_CASE("config validation") {
    DatasetConfig cfg = tiny_cfg();
    cfg.unseen_yaw_min_deg = 10.0;  // overlaps the seen [-30, 30] band
    cfg.unseen_yaw_max_deg = 60.0;
    try {
        validate_dataset_config(cfg);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("yaw") != std::string::npos);
    }

    DatasetConfig bad = tiny_cfg();
    bad.samples_per_class = 0;
    CHECK_THROWS_AS(validate_dataset_config(bad), std::invalid_argument);
}

TEST_CASE("infeasible geometry is reported, not looped forever") {
    DatasetConfig cfg = tiny_cfg();
    cfg.translation_jitter = 10.0;  // every render leaves the frame
    try {
        generate_dataset(cfg);
        FAIL("expected a feasibility error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("feasible") != std::string::npos);
    }
}

TEST_CASE("rasterize produces dense per-frame tensors") {
    DatasetConfig cfg = tiny_cfg();
    Dataset ds = generate_dataset(cfg);
    const Sample* s = ds.split("test-seen").front();
    auto rasters = rasterize(s->views[0], cfg);
    REQUIRE(rasters.size() == kFrames);
    for (std::size_t t = 0; t < kFrames; ++t) {
        CHECK(rasters[t].feat.dim(0) == kJoints);
        CHECK(rasters[t].feat.dim(1) == cfg.raster);
        CHECK(rasters[t].feat.dim(2) == cfg.raster);
        CHECK(rasters[t].coord.dim(0) == 3);
        // every rendered cell appears in the dense raster
        double mass = 0.0;
        for (std::size_t i = 0; i < rasters[t].feat.size(); ++i) mass += rasters[t].feat[i];
        double want = 0.0;
        for (const Cell& c : s->views[0].frames[t])
            for (double f : c.feat) want += f;
        CHECK(mass == doctest::Approx(want).epsilon(1e-12));
    }
}
