#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "viewgrid/model.hpp"
#include "viewgrid/synthdata.hpp"
#include "viewgrid/trainer.hpp"

namespace viewgrid {

// Configuration / usage problems (unknown key, bad value, bad range) — the
// CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One run, fully resolved. Model input geometry (raster/frames/num_classes/
// joints) is never configured directly; it is copied from the dataset the
// command actually loads.
struct RunConfig {
    DatasetConfig synthdata;
    ModelConfig model;
    TrainConfig train;  // train.loss carries the loss section
    std::string out_dir = "out";
    std::string dataset = "dataset.jsonl";      // relative paths join out_dir
    std::string checkpoint = "checkpoint.bin";  // ditto
    std::size_t threads = 1;                    // ablation cells in flight

    std::string dataset_path() const;
    std::string checkpoint_path() const;
};

// Defaults -> optional JSON file -> repeatable dotted overrides
// ("model.num_cameras=4"). Unknown keys and type mismatches throw
// ConfigError naming the key. Values parse as JSON scalars, falling back to
// bare strings.
RunConfig load_run_config(const std::string& config_path,  // "" = defaults
                          const std::vector<std::string>& overrides);

// Resolved config echo, canonical form (the sidecar written next to outputs).
std::string run_config_json(const RunConfig& rc);

std::string join_path(const std::string& dir, const std::string& rel);

}  // namespace viewgrid
