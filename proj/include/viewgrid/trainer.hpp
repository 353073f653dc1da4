#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "viewgrid/losses.hpp"
#include "viewgrid/model.hpp"
#include "viewgrid/synthdata.hpp"

namespace viewgrid {

struct TrainConfig {
    std::size_t epochs = 25;
    double lr = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 16;
    LossWeights loss;
    std::uint64_t seed = 1;
    bool class_balanced = false;  // round-robin batches over classes

    void validate() const;  // throws std::invalid_argument
};

struct EpochStats {
    double total = 0.0;
    double ce = 0.0;
    double three_d = 0.0;
    double cam = 0.0;
};

struct Metrics {
    std::vector<EpochStats> epochs;
    double acc_train_seen = 0.0;
    double acc_test_seen = 0.0;
    double acc_test_unseen = 0.0;
    double wall_clock_seconds = 0.0;  // kept out of the canonical JSON
};

// All unordered (i,j), i<j, with labels[i] == labels[j].
std::vector<std::pair<std::size_t, std::size_t>> pair_same_label(
    const std::vector<std::size_t>& labels);

// One training item = one rendered view of one sample.
struct Item {
    const Sample* sample = nullptr;
    std::size_t view = 0;
};
std::vector<Item> split_items(const Dataset& ds, const std::string& split);

// Argmax-of-logits accuracy over every view of the split. Throws on an
// empty split.
double evaluate(Network& net, const Dataset& ds, const std::string& split);

// SGD over shuffled (sample, view) items of the train-seen split; per batch one tape,
// per-item forward, same-label pairs over the batch, backward, step.
// Aborts with epoch/batch context if the loss goes non-finite. Fills final
// accuracies on all three splits.
Metrics train(Network& net, const Dataset& ds, const TrainConfig& cfg);

// ---- ablation grid ----
struct AblationCell {
    std::string name;
    ModelConfig model;
    LossWeights loss;
};

struct AblationRow {
    AblationCell cell;
    Metrics metrics;
};

// The paper-style grid over the given base: camera counts {1,2,4,8},
// insertion blocks {1..5}, loss components off/on, RepMatch, plain baseline.
std::vector<AblationCell> default_ablation_grid(const ModelConfig& base,
                                                const LossWeights& loss);

// Trains one network per cell (model seeded from train.seed) and evaluates
// it. `threads` > 1 runs whole cells in parallel; each cell stays
// deterministic. Results keep grid order.
std::vector<AblationRow> run_ablation(const Dataset& ds, const TrainConfig& train_cfg,
                                      const std::vector<AblationCell>& cells,
                                      std::size_t threads = 1);

std::string ablation_csv(const std::vector<AblationRow>& rows);

// Canonical run report: resolved config + per-epoch losses + accuracies.
// Deliberately excludes wall-clock so reruns are byte-identical; timing goes
// in a sidecar (write_timing).
std::string metrics_json(const ModelConfig& model, const TrainConfig& train,
                         const DatasetConfig& data, const Metrics& m);
std::string timing_json(const Metrics& m);

}  // namespace viewgrid
