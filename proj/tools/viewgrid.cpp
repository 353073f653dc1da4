#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "viewgrid/checkpoint.hpp"
#include "viewgrid/config.hpp"
#include "viewgrid/gradcheck.hpp"
#include "viewgrid/model.hpp"
#include "viewgrid/synthdata.hpp"
#include "viewgrid/trainer.hpp"

namespace vg = viewgrid;
namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--set", args.sets, "dotted override key=value (repeatable)");
    cmd->add_option("--out", args.out_dir, "output directory");
}

vg::RunConfig resolve(const CommonArgs& args) {
    vg::RunConfig rc = vg::load_run_config(args.config_path, args.sets);
    if (!args.out_dir.empty()) rc.out_dir = args.out_dir;
    return rc;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

void echo_config(const vg::RunConfig& rc, const std::string& cmd) {
    write_text(vg::join_path(rc.out_dir, cmd + "-config.json"), vg::run_config_json(rc));
}

vg::Dataset load_dataset_checked(const vg::RunConfig& rc) {
    if (!fs::exists(rc.dataset_path()))
        throw vg::ConfigError("dataset not found: " + rc.dataset_path() +
                              " (run `gen` first or point `dataset` at a file)");
    return vg::read_dataset(rc.dataset_path());
}

// Model input geometry always follows the dataset actually used.
vg::ModelConfig synced_model(const vg::RunConfig& rc, const vg::Dataset& ds) {
    vg::ModelConfig mc = rc.model;
    mc.raster = ds.config.raster;
    mc.frames = ds.config.frames;
    mc.num_classes = ds.config.num_classes;
    mc.joints = vg::kJoints;
    mc.validate();
    return mc;
}

int cmd_gen(const CommonArgs& args) {
    vg::RunConfig rc = resolve(args);
    fs::create_directories(rc.out_dir);
    vg::Dataset ds = vg::generate_dataset(rc.synthdata);
    vg::write_dataset(ds, rc.dataset_path());
    echo_config(rc, "gen");
    std::cout << "wrote " << rc.dataset_path() << ": " << ds.samples.size() << " samples\n";
    return 0;
}

int cmd_train(const CommonArgs& args) {
    vg::RunConfig rc = resolve(args);
    fs::create_directories(rc.out_dir);
    vg::Dataset ds = load_dataset_checked(rc);
    vg::ModelConfig mc = synced_model(rc, ds);
    vg::Network net(mc, rc.train.seed);
    vg::Metrics m = vg::train(net, ds, rc.train);
    vg::save_checkpoint(rc.checkpoint_path(), net.parameters());
    write_text(vg::join_path(rc.out_dir, "metrics.json"),
               vg::metrics_json(mc, rc.train, ds.config, m));
    write_text(vg::join_path(rc.out_dir, "timing.json"), vg::timing_json(m));
    echo_config(rc, "train");
    std::printf("seen=%.3f unseen=%.3f\n", m.acc_test_seen, m.acc_test_unseen);
    return 0;
}

int cmd_eval(const CommonArgs& args) {
    vg::RunConfig rc = resolve(args);
    fs::create_directories(rc.out_dir);
    vg::Dataset ds = load_dataset_checked(rc);
    if (!fs::exists(rc.checkpoint_path()))
        throw vg::ConfigError("checkpoint not found: " + rc.checkpoint_path());
    vg::ModelConfig mc = synced_model(rc, ds);
    vg::Network net(mc, rc.train.seed);
    vg::load_checkpoint(rc.checkpoint_path(), net.parameters());
    double seen = vg::evaluate(net, ds, "test-seen");
    double unseen = vg::evaluate(net, ds, "test-unseen");
    vg::Metrics m;
    m.acc_train_seen = vg::evaluate(net, ds, "train-seen");
    m.acc_test_seen = seen;
    m.acc_test_unseen = unseen;
    write_text(vg::join_path(rc.out_dir, "eval.json"),
               vg::metrics_json(mc, rc.train, ds.config, m));
    echo_config(rc, "eval");
    std::printf("seen=%.3f unseen=%.3f\n", seen, unseen);
    return 0;
}

int cmd_ablate(const CommonArgs& args) {
    vg::RunConfig rc = resolve(args);
    fs::create_directories(rc.out_dir);
    vg::Dataset ds = load_dataset_checked(rc);
    vg::ModelConfig mc = synced_model(rc, ds);
    std::vector<vg::AblationCell> cells = vg::default_ablation_grid(mc, rc.train.loss);
    std::vector<vg::AblationRow> rows = vg::run_ablation(ds, rc.train, cells, rc.threads);
    std::string csv = vg::ablation_csv(rows);
    std::string path = vg::join_path(rc.out_dir, "ablation.csv");
    write_text(path, csv);
    echo_config(rc, "ablate");
    std::cout << csv << "wrote " << path << "\n";
    return 0;
}

int cmd_gradcheck() {
    vg::register_builtin_gradchecks();
    std::vector<vg::GradCheckResult> results = vg::run_gradchecks();
    std::cout << vg::format_gradcheck_report(results);
    return vg::all_passed(results) ? 0 : 1;
}

int cmd_export_cameras(const CommonArgs& args) {
    vg::RunConfig rc = resolve(args);
    fs::create_directories(rc.out_dir);
    if (!rc.model.geometric())
        throw vg::ConfigError("checkpoint has no cameras (head=" +
                              std::string(vg::head_name(rc.model.head)) +
                              "); only world3d/multiview2d checkpoints carry cameras");
    if (!fs::exists(rc.checkpoint_path()))
        throw vg::ConfigError("checkpoint not found: " + rc.checkpoint_path());
    vg::Network net(rc.model, rc.train.seed);
    vg::load_checkpoint(rc.checkpoint_path(), net.parameters());

    std::string path = vg::join_path(rc.out_dir, "cameras.csv");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "idx,yaw,pitch,roll,s_x,s_y,x_0,y_0,"
           "k00,k01,k02,k10,k11,k12,k20,k21,k22\n";
    char buf[32];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::vector<vg::LearnedCamera>& cams = net.cameras();
    for (std::size_t i = 0; i < cams.size(); ++i) {
        vg::LearnedCamera& c = cams[i];
        vg::EulerAngles ang{c.yaw.value.item(), c.pitch.value.item(), c.roll.value.item()};
        vg::Mat3 r = vg::rotation_from_euler(ang);
        vg::Mat3 k = vg::intrinsic_matrix(c.intrinsics(), r);
        out << i << ',' << num(ang.yaw) << ',' << num(ang.pitch) << ',' << num(ang.roll)
            << ',' << num(c.intrinsics().s_x) << ',' << num(c.intrinsics().s_y) << ','
            << num(c.intrinsics().x_0) << ',' << num(c.intrinsics().y_0);
        for (double v : k) out << ',' << num(v);
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
    out.close();
    std::cout << "wrote " << path << ": " << cams.size() << " cameras\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-view action classification experiments"};
    app.require_subcommand(1);

    CommonArgs gen_args, train_args, eval_args, ablate_args, export_args;
    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    add_common(gen, gen_args);
    CLI::App* train = app.add_subcommand("train", "train a model and write a checkpoint");
    add_common(train, train_args);
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval, eval_args);
    CLI::App* ablate = app.add_subcommand("ablate", "run the ablation grid");
    add_common(ablate, ablate_args);
    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference check of every op");
    CLI::App* exportc =
        app.add_subcommand("export-cameras", "dump learned camera poses as CSV");
    add_common(exportc, export_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_args);
        if (train->parsed()) return cmd_train(train_args);
        if (eval->parsed()) return cmd_eval(eval_args);
        if (ablate->parsed()) return cmd_ablate(ablate_args);
        if (gradcheck->parsed()) return cmd_gradcheck();
        if (exportc->parsed()) return cmd_export_cameras(export_args);
    } catch (const vg::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
