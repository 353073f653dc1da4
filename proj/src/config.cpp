#include "viewgrid/config.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace viewgrid {

using nlohmann::ordered_json;

namespace {

ordered_json model_to_json(const ModelConfig& m) {
    return ordered_json{{"channels", m.channels},
                        {"grid", m.grid},
                        {"num_cameras", m.num_cameras},
                        {"insertion_block", m.insertion_block},
                        {"head", head_name(m.head)},
                        {"coord_mode", coord_mode_name(m.coord_mode)},
                        {"orthographic", m.orthographic}};
}

ordered_json to_tree(const RunConfig& rc) {
    return ordered_json{
        {"synthdata", dataset_config_to_json(rc.synthdata)},
        {"model", model_to_json(rc.model)},
        {"train", ordered_json{{"epochs", rc.train.epochs},
                               {"lr", rc.train.lr},
                               {"momentum", rc.train.momentum},
                               {"batch_size", rc.train.batch_size},
                               {"seed", rc.train.seed},
                               {"class_balanced", rc.train.class_balanced}}},
        {"loss", ordered_json{{"lambda1", rc.train.loss.lambda1},
                              {"lambda2", rc.train.loss.lambda2},
                              {"alpha", rc.train.loss.alpha}}},
        {"out_dir", rc.out_dir},
        {"dataset", rc.dataset},
        {"checkpoint", rc.checkpoint},
        {"threads", rc.threads}};
}

void assign_leaf(ordered_json& d, const ordered_json& v, const std::string& key) {
    if (d.is_boolean()) {
        if (!v.is_boolean()) throw ConfigError("config: '" + key + "' expects a boolean");
        d = v;
    } else if (d.is_string()) {
        if (!v.is_string()) throw ConfigError("config: '" + key + "' expects a string");
        d = v;
    } else if (d.is_number_unsigned()) {
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw ConfigError("config: '" + key + "' expects a non-negative integer");
        d = ordered_json(v.get<std::uint64_t>());
    } else if (d.is_number()) {
        if (!v.is_number()) throw ConfigError("config: '" + key + "' expects a number");
        d = ordered_json(v.get<double>());
    } else {
        throw ConfigError("config: unsupported value at '" + key + "'");
    }
}

void merge_into(ordered_json& dst, const ordered_json& src, const std::string& path) {
    if (!src.is_object())
        throw ConfigError("config: expected an object at " +
                          (path.empty() ? std::string("top level") : "'" + path + "'"));
    for (auto it = src.begin(); it != src.end(); ++it) {
        std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!dst.contains(it.key())) throw ConfigError("config: unknown key '" + key + "'");
        ordered_json& d = dst[it.key()];
        if (d.is_object())
            merge_into(d, it.value(), key);
        else
            assign_leaf(d, it.value(), key);
    }
}

void apply_override(ordered_json& tree, const std::string& spec) {
    std::size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("config: override must look like key=value, got '" + spec + "'");
    std::string key = spec.substr(0, eq);
    std::string raw = spec.substr(eq + 1);

    ordered_json* node = &tree;
    std::size_t pos = 0;
    while (true) {
        std::size_t dot = key.find('.', pos);
        std::string part = key.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (!node->is_object() || !node->contains(part))
            throw ConfigError("config: unknown key '" + key + "'");
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    if (node->is_object())
        throw ConfigError("config: '" + key + "' is a section, not a value");

    ordered_json value = ordered_json::parse(raw, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded() || value.is_object() || value.is_array())
        value = ordered_json(raw);  // bare string
    assign_leaf(*node, value, key);
}

RunConfig from_tree(const ordered_json& j) {
    RunConfig rc;
    try {
        rc.synthdata = dataset_config_from_json(j.at("synthdata"));
        const ordered_json& m = j.at("model");
        rc.model.channels = m.at("channels").get<std::size_t>();
        rc.model.grid = m.at("grid").get<std::size_t>();
        rc.model.num_cameras = m.at("num_cameras").get<std::size_t>();
        rc.model.insertion_block = m.at("insertion_block").get<std::size_t>();
        rc.model.head = head_from_name(m.at("head").get<std::string>());
        rc.model.coord_mode = coord_mode_from_name(m.at("coord_mode").get<std::string>());
        rc.model.orthographic = m.at("orthographic").get<bool>();
        const ordered_json& t = j.at("train");
        rc.train.epochs = t.at("epochs").get<std::size_t>();
        rc.train.lr = t.at("lr").get<double>();
        rc.train.momentum = t.at("momentum").get<double>();
        rc.train.batch_size = t.at("batch_size").get<std::size_t>();
        rc.train.seed = t.at("seed").get<std::uint64_t>();
        rc.train.class_balanced = t.at("class_balanced").get<bool>();
        const ordered_json& l = j.at("loss");
        rc.train.loss.lambda1 = l.at("lambda1").get<double>();
        rc.train.loss.lambda2 = l.at("lambda2").get<double>();
        rc.train.loss.alpha = l.at("alpha").get<double>();
        rc.out_dir = j.at("out_dir").get<std::string>();
        rc.dataset = j.at("dataset").get<std::string>();
        rc.checkpoint = j.at("checkpoint").get<std::string>();
        rc.threads = j.at("threads").get<std::size_t>();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return rc;
}

}  // namespace

std::string join_path(const std::string& dir, const std::string& rel) {
    if (rel.empty()) return dir;
    if (rel.front() == '/') return rel;
    if (dir.empty()) return rel;
    if (dir.back() == '/') return dir + rel;
    return dir + "/" + rel;
}

std::string RunConfig::dataset_path() const { return join_path(out_dir, dataset); }
std::string RunConfig::checkpoint_path() const { return join_path(out_dir, checkpoint); }

RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides) {
    ordered_json tree = to_tree(RunConfig{});

    if (!config_path.empty()) {
        std::ifstream in(config_path, std::ios::binary);
        if (!in) throw ConfigError("config: cannot open file: " + config_path);
        std::stringstream buf;
        buf << in.rdbuf();
        ordered_json parsed = ordered_json::parse(buf.str(), nullptr, false);
        if (parsed.is_discarded())
            throw ConfigError("config: invalid JSON in " + config_path);
        merge_into(tree, parsed, "");
    }
    for (const std::string& ov : overrides) apply_override(tree, ov);

    RunConfig rc = from_tree(tree);

    // Model input geometry follows the dataset section; commands that load a
    // dataset file re-sync from its header.
    rc.model.raster = rc.synthdata.raster;
    rc.model.frames = rc.synthdata.frames;
    rc.model.num_classes = rc.synthdata.num_classes;
    rc.model.joints = kJoints;

    try {
        validate_dataset_config(rc.synthdata);
        rc.model.validate();
        rc.train.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (rc.train.loss.alpha < 0.0) throw ConfigError("config: loss.alpha must be >= 0");
    if (rc.threads == 0) throw ConfigError("config: threads must be >= 1");
    return rc;
}

std::string run_config_json(const RunConfig& rc) { return to_tree(rc).dump(2) + "\n"; }

}  // namespace viewgrid
