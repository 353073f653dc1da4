#include "viewgrid/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "viewgrid/optim.hpp"
#include "viewgrid/ops.hpp"
#include "viewgrid/rng.hpp"

namespace viewgrid {

using nlohmann::ordered_json;

void TrainConfig::validate() const {
    if (lr < 0.0) throw std::invalid_argument("learning rate must be non-negative");
    if (momentum < 0.0) throw std::invalid_argument("momentum must be non-negative");
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
    if (loss.lambda1 > 0.0 && batch_size < 2)
        throw std::invalid_argument("batch size must be >= 2 when lambda1 > 0 (pair loss)");
}

std::vector<std::pair<std::size_t, std::size_t>> pair_same_label(
    const std::vector<std::size_t>& labels) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = i + 1; j < labels.size(); ++j)
            if (labels[i] == labels[j]) pairs.emplace_back(i, j);
    return pairs;
}

std::vector<Item> split_items(const Dataset& ds, const std::string& split) {
    std::vector<Item> items;
    for (const Sample& s : ds.samples) {
        if (s.split != split) continue;
        for (std::size_t v = 0; v < s.views.size(); ++v) items.push_back({&s, v});
    }
    return items;
}

double evaluate(Network& net, const Dataset& ds, const std::string& split) {
    std::vector<Item> items = split_items(ds, split);
    if (items.empty()) throw std::invalid_argument("evaluate: empty split '" + split + "'");
    std::size_t correct = 0;
    for (const Item& it : items) {
        Tape tape;
        Network::Forward f = net.forward(tape, it.sample->views[it.view], ds.config);
        const Tensor& logits = f.logits.value();
        std::size_t best = 0;
        for (std::size_t k = 1; k < logits.size(); ++k)
            if (logits[k] > logits[best]) best = k;
        if (best == (std::size_t)it.sample->class_id) ++correct;
    }
    return double(correct) / double(items.size());
}

namespace {

// Deterministic batch order for one epoch.
std::vector<std::size_t> epoch_order(const std::vector<Item>& items, const TrainConfig& cfg,
                                     std::size_t epoch) {
    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (!cfg.class_balanced) {
        Rng rng(Rng::derive(cfg.seed, 0xE0000 + epoch));
        rng.shuffle(order);
        return order;
    }
    // Round-robin over per-class queues, each shuffled independently.
    std::map<int, std::vector<std::size_t>> per_class;
    for (std::size_t i = 0; i < items.size(); ++i)
        per_class[items[i].sample->class_id].push_back(i);
    std::size_t stream = 0;
    for (auto& [cls, list] : per_class) {
        Rng rng(Rng::derive(cfg.seed, 0xB0000 + epoch * 64 + stream++));
        rng.shuffle(list);
    }
    order.clear();
    bool any = true;
    for (std::size_t round = 0; any; ++round) {
        any = false;
        for (auto& [cls, list] : per_class)
            if (round < list.size()) {
                order.push_back(list[round]);
                any = true;
            }
    }
    return order;
}

}  // namespace

Metrics train(Network& net, const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();
    std::vector<Item> items = split_items(ds, "train-seen");
    if (items.empty()) throw std::invalid_argument("train: dataset has no train_seen items");

    std::vector<LearnedCamera>* cams =
        net.config().head == Head::multiview2d ? &net.cameras() : nullptr;

    Metrics m;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order = epoch_order(items, cfg, epoch);
        EpochStats es;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t end = std::min(order.size(), start + cfg.batch_size);
            Tape tape;
            std::vector<Var> logits, reps;
            std::vector<std::size_t> labels;
            for (std::size_t k = start; k < end; ++k) {
                const Item& it = items[order[k]];
                Network::Forward f = net.forward(tape, it.sample->views[it.view], ds.config);
                logits.push_back(f.logits);
                labels.push_back((std::size_t)it.sample->class_id);
                if (f.representation.valid()) reps.push_back(f.representation);
            }
            auto pairs = pair_same_label(labels);
            losses::LossBreakdown lb =
                losses::total_loss(tape, logits, labels, pairs, reps, cams, cfg.loss);
            double total = lb.total.item();
            if (!std::isfinite(total))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch + 1) + ", batch " +
                                         std::to_string(batches + 1));
            tape.backward(lb.total);
            sgd_step(net.parameters(), cfg.lr, cfg.momentum);

            es.total += total;
            es.ce += lb.ce.valid() ? lb.ce.item() : 0.0;
            es.three_d += lb.three_d.valid() ? lb.three_d.item() : 0.0;
            es.cam += lb.cam.valid() ? lb.cam.item() : 0.0;
            ++batches;
        }
        es.total /= double(batches);
        es.ce /= double(batches);
        es.three_d /= double(batches);
        es.cam /= double(batches);
        m.epochs.push_back(es);
    }

    m.acc_train_seen = evaluate(net, ds, "train-seen");
    m.acc_test_seen = evaluate(net, ds, "test-seen");
    m.acc_test_unseen = evaluate(net, ds, "test-unseen");
    m.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return m;
}

std::vector<AblationCell> default_ablation_grid(const ModelConfig& base,
                                                const LossWeights& loss) {
    std::vector<AblationCell> cells;
    LossWeights off = loss;
    off.lambda1 = 0.0;
    off.lambda2 = 0.0;
    LossWeights only3d = loss;
    only3d.lambda2 = 0.0;
    LossWeights onlycam = loss;
    onlycam.lambda1 = 0.0;

    ModelConfig baseline = base;
    baseline.head = Head::baseline_none;
    baseline.coord_mode = CoordMode::learned;
    cells.push_back({"baseline", baseline, off});

    ModelConfig rep = base;
    rep.head = Head::repmatch;
    rep.coord_mode = CoordMode::learned;
    cells.push_back({"repmatch", rep, only3d});

    cells.push_back({"mvp_only", base, off});
    cells.push_back({"mvp_3d", base, only3d});
    cells.push_back({"mvp_cam", base, onlycam});
    cells.push_back({"full", base, loss});

    for (std::size_t n : {1u, 2u, 4u, 8u}) {
        ModelConfig mc = base;
        mc.num_cameras = n;
        cells.push_back({"cams" + std::to_string(n), mc, loss});
    }
    for (std::size_t b = 1; b <= 5; ++b) {
        ModelConfig mc = base;
        mc.insertion_block = b;
        cells.push_back({"block" + std::to_string(b), mc, loss});
    }
    return cells;
}

std::vector<AblationRow> run_ablation(const Dataset& ds, const TrainConfig& train_cfg,
                                      const std::vector<AblationCell>& cells,
                                      std::size_t threads) {
    std::vector<AblationRow> rows(cells.size());
    auto run_cell = [&](std::size_t i) {
        Network net(cells[i].model, train_cfg.seed);
        TrainConfig tc = train_cfg;
        tc.loss = cells[i].loss;
        rows[i] = AblationRow{cells[i], train(net, ds, tc)};
    };
    if (threads <= 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
        return rows;
    }
    std::size_t next = 0;
    while (next < cells.size()) {
        std::vector<std::future<void>> wave;
        for (std::size_t t = 0; t < threads && next < cells.size(); ++t, ++next)
            wave.push_back(std::async(std::launch::async, run_cell, next));
        for (auto& f : wave) f.get();
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "name,head,coord_mode,num_cameras,insertion_block,lambda1,lambda2,"
          "acc_train_seen,acc_test_seen,acc_test_unseen\n";
    auto num = [](double v) {
        std::ostringstream s;
        s << v;
        return s.str();
    };
    for (const AblationRow& r : rows) {
        os << r.cell.name << ',' << head_name(r.cell.model.head) << ','
           << coord_mode_name(r.cell.model.coord_mode) << ',' << r.cell.model.num_cameras
           << ',' << r.cell.model.insertion_block << ',' << num(r.cell.loss.lambda1) << ','
           << num(r.cell.loss.lambda2) << ',' << num(r.metrics.acc_train_seen) << ','
           << num(r.metrics.acc_test_seen) << ',' << num(r.metrics.acc_test_unseen) << '\n';
    }
    return os.str();
}

namespace {

ordered_json model_config_to_json(const ModelConfig& c) {
    return ordered_json{{"channels", c.channels},
                        {"grid", c.grid},
                        {"num_cameras", c.num_cameras},
                        {"insertion_block", c.insertion_block},
                        {"head", head_name(c.head)},
                        {"coord_mode", coord_mode_name(c.coord_mode)},
                        {"orthographic", c.orthographic},
                        {"num_classes", c.num_classes},
                        {"raster", c.raster},
                        {"frames", c.frames},
                        {"joints", c.joints}};
}

}  // namespace

std::string metrics_json(const ModelConfig& model, const TrainConfig& train,
                         const DatasetConfig& data, const Metrics& m) {
    ordered_json cfg{{"model", model_config_to_json(model)},
                     {"train", ordered_json{{"epochs", train.epochs},
                                            {"lr", train.lr},
                                            {"momentum", train.momentum},
                                            {"batch_size", train.batch_size},
                                            {"seed", train.seed},
                                            {"class_balanced", train.class_balanced}}},
                     {"loss", ordered_json{{"lambda1", train.loss.lambda1},
                                           {"lambda2", train.loss.lambda2},
                                           {"alpha", train.loss.alpha}}},
                     {"dataset", dataset_config_to_json(data)}};
    ordered_json epochs = ordered_json::array();
    for (std::size_t e = 0; e < m.epochs.size(); ++e)
        epochs.push_back(ordered_json{{"epoch", e + 1},
                                      {"total", m.epochs[e].total},
                                      {"ce", m.epochs[e].ce},
                                      {"three_d", m.epochs[e].three_d},
                                      {"cam", m.epochs[e].cam}});
    ordered_json j{{"config", std::move(cfg)},
                   {"epochs", std::move(epochs)},
                   {"accuracy", ordered_json{{"train-seen", m.acc_train_seen},
                                             {"test-seen", m.acc_test_seen},
                                             {"test-unseen", m.acc_test_unseen}}}};
    return j.dump(2) + "\n";
}

std::string timing_json(const Metrics& m) {
    ordered_json j{{"wall_clock_seconds", m.wall_clock_seconds}};
    return j.dump(2) + "\n";
}

}  // namespace viewgrid
