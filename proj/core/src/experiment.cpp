#include "initlab/experiment.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "initlab/dataset.hpp"
#include "initlab/diagnostics.hpp"
#include "initlab/errors.hpp"
#include "initlab/init.hpp"
#include "initlab/linalg.hpp"
#include "initlab/network.hpp"
#include "initlab/presets.hpp"
#include "initlab/trainer.hpp"

namespace initlab {

using json = nlohmann::ordered_json;

namespace {

// ---- enum <-> string -------------------------------------------------------

ActivationKind parse_activation(const std::string& s) {
    if (s == "relu") return ActivationKind::kRelu;
    if (s == "vlrelu") return ActivationKind::kVlrelu;
    if (s == "tanh") return ActivationKind::kTanh;
    if (s == "sigmoid") return ActivationKind::kSigmoid;
    if (s == "maxout") return ActivationKind::kMaxout;
    throw ConfigError("activation: unknown value '" + s +
                      "' (expected relu, vlrelu, tanh, sigmoid or maxout)");
}

BatchNormPlacement parse_placement(const std::string& s) {
    if (s == "before") return BatchNormPlacement::kBeforeNonlinearity;
    if (s == "after") return BatchNormPlacement::kAfterNonlinearity;
    throw ConfigError("bn_placement: unknown value '" + s + "' (expected before or after)");
}

LossKind parse_loss(const std::string& s) {
    if (s == "softmax") return LossKind::kSoftmaxCrossEntropy;
    if (s == "l2svm") return LossKind::kL2Svm;
    throw ConfigError("loss: unknown value '" + s + "' (expected softmax or l2svm)");
}

LsuvPreInit parse_pre_init(const std::string& s) {
    if (s == "ortho") return LsuvPreInit::kOrthonormal;
    if (s == "gaussian") return LsuvPreInit::kGaussian;
    throw ConfigError("lsuv_pre_init: unknown value '" + s + "' (expected ortho or gaussian)");
}

const std::set<std::string>& known_kinds() {
    static const std::set<std::string> kinds = {"train",        "init-report",  "sweep",
                                                "lsuv-inspect", "bn-placement", "batch-sensitivity"};
    return kinds;
}

// ---- number formatting ------------------------------------------------------

std::string fmt(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

std::string fmt(std::size_t v) { return std::to_string(v); }

std::string fmt(bool v) { return v ? "true" : "false"; }

// Rows of pre-formatted cells; the CSV and its JSON mirror are built from
// the same strings so they cannot drift apart.
class ReportBuilder {
public:
    explicit ReportBuilder(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    ReportBuilder& cell(const std::string& s) {
        row_.push_back(s);
        return *this;
    }
    ReportBuilder& cell(const char* s) { return cell(std::string(s)); }
    ReportBuilder& cell(double v) { return cell(fmt(v)); }
    ReportBuilder& cell(std::size_t v) { return cell(fmt(v)); }
    ReportBuilder& cell(bool v) { return cell(fmt(v)); }

    void end_row() {
        if (row_.size() != columns_.size()) {
            throw StateError("report row width does not match its header");
        }
        rows_.push_back(std::move(row_));
        row_.clear();
    }

    std::string csv() const {
        std::string out = join(columns_);
        for (const std::vector<std::string>& row : rows_) {
            out += join(row);
        }
        return out;
    }

    json rows_json() const {
        json arr = json::array();
        for (const std::vector<std::string>& row : rows_) {
            json obj = json::object();
            for (std::size_t c = 0; c < columns_.size(); ++c) {
                obj[columns_[c]] = row[c];
            }
            arr.push_back(obj);
        }
        return arr;
    }

    const std::vector<std::string>& columns() const { return columns_; }

private:
    static std::string join(const std::vector<std::string>& cells) {
        std::string line;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i > 0) {
                line += ',';
            }
            line += cells[i];
        }
        line += '\n';
        return line;
    }

    std::vector<std::string> columns_;
    std::vector<std::string> row_;
    std::vector<std::vector<std::string>> rows_;
};

// ---- layer (de)serialization --------------------------------------------------

json layer_to_json(const LayerSpec& spec) {
    json j = json::object();
    if (const auto* c = std::get_if<ConvSpec>(&spec)) {
        j["type"] = "conv";
        j["kernel_h"] = c->kernel_h;
        j["kernel_w"] = c->kernel_w;
        j["in"] = c->in_channels;
        j["out"] = c->out_channels;
        j["stride"] = c->stride;
        j["pad"] = c->pad;
    } else if (const auto* f = std::get_if<FullyConnectedSpec>(&spec)) {
        j["type"] = "fc";
        j["in"] = f->in_features;
        j["out"] = f->out_features;
    } else if (const auto* p = std::get_if<PoolSpec>(&spec)) {
        j["type"] = "pool";
        j["mode"] = p->mode == PoolMode::kMax ? "max" : "average";
        j["kernel"] = p->kernel;
        j["stride"] = p->stride;
        j["global"] = p->global;
    } else if (const auto* a = std::get_if<ActivationSpec>(&spec)) {
        j["type"] = "activation";
        j["kind"] = activation_kind_name(a->kind);
        j["slope"] = a->slope;
        j["pieces"] = a->pieces;
    } else if (const auto* bn = std::get_if<BatchNormSpec>(&spec)) {
        j["type"] = "batchnorm";
        j["placement"] =
            bn->placement == BatchNormPlacement::kBeforeNonlinearity ? "before" : "after";
        j["epsilon"] = bn->epsilon;
    } else if (const auto* r = std::get_if<ResidualAddSpec>(&spec)) {
        j["type"] = "sum";
        j["source"] = r->source_layer;
    }
    return j;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& item : j.items()) {
        if (allowed.find(item.key()) == allowed.end()) {
            throw ConfigError(where + ": unknown field '" + item.key() + "'");
        }
    }
}

LayerSpec layer_from_json(const json& j, std::size_t index) {
    const std::string where = "layers[" + std::to_string(index) + "]";
    if (!j.is_object() || !j.contains("type")) {
        throw ConfigError(where + ": expected an object with a 'type' field");
    }
    const std::string type = j.at("type").get<std::string>();
    try {
        if (type == "conv") {
            check_keys(j, {"type", "kernel", "kernel_h", "kernel_w", "in", "out", "stride", "pad"},
                       where);
            ConvSpec c;
            if (j.contains("kernel")) {
                c.kernel_h = c.kernel_w = j.at("kernel").get<std::size_t>();
            }
            c.kernel_h = j.value("kernel_h", c.kernel_h);
            c.kernel_w = j.value("kernel_w", c.kernel_w);
            c.in_channels = j.at("in").get<std::size_t>();
            c.out_channels = j.at("out").get<std::size_t>();
            c.stride = j.value("stride", std::size_t{1});
            c.pad = j.value("pad", std::size_t{0});
            return c;
        }
        if (type == "fc") {
            check_keys(j, {"type", "in", "out"}, where);
            FullyConnectedSpec f;
            f.in_features = j.at("in").get<std::size_t>();
            f.out_features = j.at("out").get<std::size_t>();
            return f;
        }
        if (type == "pool") {
            check_keys(j, {"type", "mode", "kernel", "stride", "global"}, where);
            PoolSpec p;
            const std::string mode = j.value("mode", std::string("max"));
            if (mode == "max") {
                p.mode = PoolMode::kMax;
            } else if (mode == "average") {
                p.mode = PoolMode::kAverage;
            } else {
                throw ConfigError(where + ": unknown pool mode '" + mode + "'");
            }
            p.kernel = j.value("kernel", std::size_t{2});
            p.stride = j.value("stride", std::size_t{2});
            p.global = j.value("global", false);
            return p;
        }
        if (type == "activation") {
            check_keys(j, {"type", "kind", "slope", "pieces"}, where);
            ActivationSpec a;
            a.kind = parse_activation(j.at("kind").get<std::string>());
            a.slope = j.value("slope", 0.333);
            a.pieces = j.value("pieces", std::size_t{2});
            return a;
        }
        if (type == "batchnorm") {
            check_keys(j, {"type", "placement", "epsilon"}, where);
            BatchNormSpec bn;
            bn.placement = parse_placement(j.value("placement", std::string("before")));
            bn.epsilon = j.value("epsilon", 1e-5);
            return bn;
        }
        if (type == "sum") {
            check_keys(j, {"type", "source"}, where);
            ResidualAddSpec r;
            r.source_layer = j.at("source").get<std::size_t>();
            return r;
        }
    } catch (const json::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ": unknown layer type '" + type + "'");
}

template <typename T>
T get_field(const json& j, const std::string& key, const T& fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

}  // namespace

void validate(const ExperimentConfig& c) {
    if (known_kinds().find(c.kind) == known_kinds().end()) {
        std::string valid;
        for (const std::string& k : known_kinds()) {
            valid += valid.empty() ? k : ", " + k;
        }
        throw ConfigError("kind: unknown experiment '" + c.kind + "' (expected one of " + valid + ")");
    }
    if (c.dataset != "blobs" && c.dataset != "mnist") {
        throw ConfigError("dataset: unknown value '" + c.dataset + "' (expected blobs or mnist)");
    }
    if (c.preset != "inline") {
        preset_default_input(c.preset);  // throws for unknown names
    } else if (c.layers.empty()) {
        throw ConfigError("layers: required (non-empty) when preset is 'inline'");
    }
    if (c.init != "gaussian" && c.init != "xavier" && c.init != "msra" && c.init != "ortho" &&
        c.init != "lsuv") {
        throw ConfigError("init: unknown value '" + c.init +
                          "' (expected gaussian, xavier, msra, ortho or lsuv)");
    }
    parse_activation(c.activation);
    parse_placement(c.bn_placement);
    parse_loss(c.loss);
    parse_pre_init(c.lsuv_pre_init);
    if (c.gaussian_std <= 0.0) {
        throw ConfigError("gaussian_std: must be positive");
    }
    if (c.tol_var <= 0.0) {
        throw ConfigError("tol_var: must be positive");
    }
    if (c.t_max < 1) {
        throw ConfigError("t_max: must be at least 1");
    }
    if (c.lsuv_batch < 2) {
        throw ConfigError("lsuv_batch: must be at least 2");
    }
    if (c.learning_rate <= 0.0) {
        throw ConfigError("learning_rate: must be positive");
    }
    if (c.momentum < 0.0 || c.momentum >= 1.0) {
        throw ConfigError("momentum: must lie in [0, 1)");
    }
    if (c.weight_decay < 0.0) {
        throw ConfigError("weight_decay: must be nonnegative");
    }
    if (c.batch_size < 1) {
        throw ConfigError("batch_size: must be at least 1");
    }
    if (c.n_classes < 2) {
        throw ConfigError("n_classes: must be at least 2");
    }
    if (c.blob_per_class < 1) {
        throw ConfigError("blob_per_class: must be at least 1");
    }
    if (c.blob_separation <= 0.0) {
        throw ConfigError("blob_separation: must be positive");
    }
    if (c.jobs < 1) {
        throw ConfigError("jobs: must be at least 1");
    }
    for (std::size_t k = 1; k < c.lr_schedule.size(); ++k) {
        if (c.lr_schedule[k].first <= c.lr_schedule[k - 1].first) {
            throw ConfigError("lr_schedule: epochs must be strictly increasing");
        }
    }
    for (double s : c.scales) {
        if (s <= 0.0) {
            throw ConfigError("scales: must all be positive");
        }
    }
    for (std::size_t s : c.sizes) {
        if (s < 2) {
            throw ConfigError("sizes: estimation batches need at least 2 samples");
        }
    }
    if (c.kind == "sweep" && c.scales.empty()) {
        throw ConfigError("scales: required for sweep runs");
    }
    if (c.kind == "batch-sensitivity" && c.sizes.empty()) {
        throw ConfigError("sizes: required for batch-sensitivity runs");
    }
    if (c.kind == "bn-placement" && c.preset == "inline") {
        throw ConfigError("preset: bn-placement needs a named preset to place the normalization in");
    }
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ConfigError("config root must be a JSON object");
    }
    static const std::set<std::string> allowed = {
        "kind",          "seed",        "out_dir",       "dataset",       "data_dir",
        "blob_per_class", "blob_separation", "input_shape", "preset",     "layers",
        "activation",    "vlrelu_slope", "conv_pieces",  "fc_pieces",     "batch_norm",
        "bn_placement",  "n_classes",   "mlp_hidden",    "init",          "gaussian_std",
        "tol_var",       "t_max",       "lsuv_pre_init", "lsuv_batch",    "loss",
        "learning_rate", "momentum",    "weight_decay",  "epochs",        "batch_size",
        "lr_schedule",   "max_iterations", "scales",     "sizes",         "jobs"};
    check_keys(j, allowed, "config");

    ExperimentConfig c;
    c.kind = get_field(j, "kind", c.kind);
    c.seed = get_field(j, "seed", c.seed);
    c.out_dir = get_field(j, "out_dir", c.out_dir);
    c.dataset = get_field(j, "dataset", c.dataset);
    c.data_dir = get_field(j, "data_dir", c.data_dir);
    c.blob_per_class = get_field(j, "blob_per_class", c.blob_per_class);
    c.blob_separation = get_field(j, "blob_separation", c.blob_separation);
    c.input_shape = get_field(j, "input_shape", c.input_shape);
    c.preset = get_field(j, "preset", c.preset);
    c.activation = get_field(j, "activation", c.activation);
    c.vlrelu_slope = get_field(j, "vlrelu_slope", c.vlrelu_slope);
    c.conv_pieces = get_field(j, "conv_pieces", c.conv_pieces);
    c.fc_pieces = get_field(j, "fc_pieces", c.fc_pieces);
    c.batch_norm = get_field(j, "batch_norm", c.batch_norm);
    c.bn_placement = get_field(j, "bn_placement", c.bn_placement);
    c.n_classes = get_field(j, "n_classes", c.n_classes);
    c.mlp_hidden = get_field(j, "mlp_hidden", c.mlp_hidden);
    c.init = get_field(j, "init", c.init);
    c.gaussian_std = get_field(j, "gaussian_std", c.gaussian_std);
    c.tol_var = get_field(j, "tol_var", c.tol_var);
    c.t_max = get_field(j, "t_max", c.t_max);
    c.lsuv_pre_init = get_field(j, "lsuv_pre_init", c.lsuv_pre_init);
    c.lsuv_batch = get_field(j, "lsuv_batch", c.lsuv_batch);
    c.loss = get_field(j, "loss", c.loss);
    c.learning_rate = get_field(j, "learning_rate", c.learning_rate);
    c.momentum = get_field(j, "momentum", c.momentum);
    c.weight_decay = get_field(j, "weight_decay", c.weight_decay);
    c.epochs = get_field(j, "epochs", c.epochs);
    c.batch_size = get_field(j, "batch_size", c.batch_size);
    c.max_iterations = get_field(j, "max_iterations", c.max_iterations);
    c.scales = get_field(j, "scales", c.scales);
    c.sizes = get_field(j, "sizes", c.sizes);
    c.jobs = get_field(j, "jobs", c.jobs);

    if (j.contains("lr_schedule")) {
        c.lr_schedule.clear();
        const json& sched = j.at("lr_schedule");
        if (!sched.is_array()) {
            throw ConfigError("lr_schedule: expected an array of [epoch, multiplier] pairs");
        }
        for (const json& entry : sched) {
            if (!entry.is_array() || entry.size() != 2) {
                throw ConfigError("lr_schedule: each entry must be an [epoch, multiplier] pair");
            }
            c.lr_schedule.emplace_back(entry[0].get<std::size_t>(), entry[1].get<double>());
        }
    }
    if (j.contains("layers")) {
        const json& layers = j.at("layers");
        if (!layers.is_array()) {
            throw ConfigError("layers: expected an array of layer objects");
        }
        for (std::size_t i = 0; i < layers.size(); ++i) {
            c.layers.push_back(layer_from_json(layers[i], i));
        }
    }

    validate(c);
    return c;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(path + ": cannot open config file");
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string config_to_json(const ExperimentConfig& c) {
    json j = json::object();
    j["kind"] = c.kind;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    j["dataset"] = c.dataset;
    j["data_dir"] = c.data_dir;
    j["blob_per_class"] = c.blob_per_class;
    j["blob_separation"] = c.blob_separation;
    j["input_shape"] = c.input_shape;
    j["preset"] = c.preset;
    json layers = json::array();
    for (const LayerSpec& spec : c.layers) {
        layers.push_back(layer_to_json(spec));
    }
    j["layers"] = layers;
    j["activation"] = c.activation;
    j["vlrelu_slope"] = c.vlrelu_slope;
    j["conv_pieces"] = c.conv_pieces;
    j["fc_pieces"] = c.fc_pieces;
    j["batch_norm"] = c.batch_norm;
    j["bn_placement"] = c.bn_placement;
    j["n_classes"] = c.n_classes;
    j["mlp_hidden"] = c.mlp_hidden;
    j["init"] = c.init;
    j["gaussian_std"] = c.gaussian_std;
    j["tol_var"] = c.tol_var;
    j["t_max"] = c.t_max;
    j["lsuv_pre_init"] = c.lsuv_pre_init;
    j["lsuv_batch"] = c.lsuv_batch;
    j["loss"] = c.loss;
    j["learning_rate"] = c.learning_rate;
    j["momentum"] = c.momentum;
    j["weight_decay"] = c.weight_decay;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    json sched = json::array();
    for (const auto& [epoch, mult] : c.lr_schedule) {
        sched.push_back(json::array({epoch, mult}));
    }
    j["lr_schedule"] = sched;
    j["max_iterations"] = c.max_iterations;
    j["scales"] = c.scales;
    j["sizes"] = c.sizes;
    j["jobs"] = c.jobs;
    return j.dump(2) + "\n";
}

namespace {

// ---- run_experiment machinery -------------------------------------------------

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

struct Setup {
    ExperimentConfig config;  // with input_shape and data_dir resolved
    Dataset train_data;
    Dataset test_data;
    bool has_test = false;
    std::vector<LayerSpec> specs;
    PresetOptions options;
};

PresetOptions preset_options_from(const ExperimentConfig& c) {
    PresetOptions o;
    o.activation = parse_activation(c.activation);
    o.vlrelu_slope = c.vlrelu_slope;
    o.conv_pieces = c.conv_pieces;
    o.fc_pieces = c.fc_pieces;
    o.batch_norm = c.batch_norm;
    o.bn_placement = parse_placement(c.bn_placement);
    o.n_classes = c.n_classes;
    o.mlp_hidden = c.mlp_hidden;
    return o;
}

std::string resolve_data_dir(const ExperimentConfig& c) {
    if (!c.data_dir.empty()) {
        return c.data_dir;
    }
    if (const char* env = std::getenv("INITLAB_DATA_DIR")) {
        if (*env != '\0') {
            return env;
        }
    }
    return "data/mnist";
}

bool needs_test_set(const std::string& kind) { return kind == "train" || kind == "bn-placement"; }

// Splits a class-grouped dataset into leading train and trailing test rows
// per class, so both sides share the same cluster geometry.
void split_per_class(const Dataset& pooled, std::size_t train_per_class,
                     std::size_t test_per_class, Dataset& train, Dataset& test) {
    const Shape sample = pooled.sample_shape();
    std::size_t sample_elems = 1;
    for (std::size_t d : sample) {
        sample_elems *= d;
    }
    const std::size_t per_class = train_per_class + test_per_class;

    auto make_side = [&](std::size_t rows_per_class, std::size_t offset) {
        Dataset side;
        Shape shape = sample;
        shape.insert(shape.begin(), rows_per_class * pooled.n_classes);
        side.images = Tensor::zeros(shape);
        side.labels.reserve(rows_per_class * pooled.n_classes);
        side.n_classes = pooled.n_classes;
        std::size_t out = 0;
        for (std::size_t k = 0; k < pooled.n_classes; ++k) {
            for (std::size_t r = 0; r < rows_per_class; ++r) {
                const std::size_t src = k * per_class + offset + r;
                std::copy(pooled.images.data() + src * sample_elems,
                          pooled.images.data() + (src + 1) * sample_elems,
                          side.images.data() + out * sample_elems);
                side.labels.push_back(pooled.labels[src]);
                ++out;
            }
        }
        return side;
    };
    train = make_side(train_per_class, 0);
    test = make_side(test_per_class, train_per_class);
}

Setup resolve(const ExperimentConfig& input, std::ostream& log) {
    validate(input);
    Setup s;
    s.config = input;
    ExperimentConfig& c = s.config;
    c.jobs = c.kind == "sweep" ? c.jobs : 1;

    Timer load_timer;
    if (c.dataset == "mnist") {
        c.data_dir = resolve_data_dir(c);
        const std::string base = c.data_dir + "/";
        s.train_data = load_mnist_idx(base + "train-images-idx3-ubyte", base + "train-labels-idx1-ubyte");
        if (needs_test_set(c.kind)) {
            s.test_data = load_mnist_idx(base + "t10k-images-idx3-ubyte", base + "t10k-labels-idx1-ubyte");
            s.has_test = true;
        }
        if (c.n_classes != s.train_data.n_classes) {
            throw ConfigError("n_classes: dataset has " + std::to_string(s.train_data.n_classes) +
                              " classes, config says " + std::to_string(c.n_classes));
        }
        if (c.input_shape.empty()) {
            c.input_shape = s.train_data.sample_shape();
        } else if (c.input_shape != s.train_data.sample_shape()) {
            throw ConfigError("input_shape: does not match the dataset's sample shape");
        }
    } else {
        if (c.input_shape.empty()) {
            if (c.preset == "inline") {
                throw ConfigError("input_shape: required for inline layers on synthetic data");
            }
            c.input_shape = preset_default_input(c.preset);
        }
        Rng data_rng(c.seed ^ 0x9e3779b97f4a7c15ULL);
        if (needs_test_set(c.kind)) {
            // Draw one pooled set and hold out a quarter per class: the test
            // rows must come from the same clusters the network trains on.
            const std::size_t test_per_class = (c.blob_per_class + 3) / 4;
            const Dataset pooled = synthetic_blobs(c.n_classes, c.input_shape,
                                                   c.blob_per_class + test_per_class,
                                                   c.blob_separation, data_rng);
            split_per_class(pooled, c.blob_per_class, test_per_class, s.train_data, s.test_data);
            s.has_test = true;
        } else {
            s.train_data = synthetic_blobs(c.n_classes, c.input_shape, c.blob_per_class,
                                           c.blob_separation, data_rng);
        }
    }
    log << "dataset: " << c.dataset << " (" << s.train_data.size() << " samples)\n";
    log << "phase load_data: " << load_timer.ms() << " ms\n";

    s.options = preset_options_from(c);
    s.specs = c.preset == "inline" ? c.layers : make_preset(c.preset, c.input_shape, s.options);

    if (c.kind == "batch-sensitivity") {
        for (std::size_t size : c.sizes) {
            if (size > s.train_data.size()) {
                throw ConfigError("sizes: " + std::to_string(size) + " exceeds the dataset (" +
                                  std::to_string(s.train_data.size()) +
                                  " samples; raise blob_per_class)");
            }
        }
    }
    return s;
}

// Applies the configured scheme; for lsuv the estimation batch is the
// leading slice of the training data.
LsuvReport apply_init(Network& net, const ExperimentConfig& c, const Dataset& train_data, Rng& rng) {
    if (c.init == "gaussian") {
        init_gaussian(net, c.gaussian_std, rng);
    } else if (c.init == "xavier") {
        init_xavier(net, rng);
    } else if (c.init == "msra") {
        init_msra(net, rng);
    } else if (c.init == "ortho") {
        init_orthonormal(net, rng);
    } else {
        const std::size_t n = std::min<std::size_t>(c.lsuv_batch, train_data.size());
        const Batch batch = take_batch(train_data, 0, n);
        LsuvOptions options;
        options.tol_var = c.tol_var;
        options.t_max = c.t_max;
        options.pre_init = parse_pre_init(c.lsuv_pre_init);
        return lsuv(net, batch.images, options, rng);
    }
    return {};
}

TrainOptions train_options_from(const ExperimentConfig& c, const Dataset* test_set) {
    TrainOptions o;
    o.loss = parse_loss(c.loss);
    o.sgd.learning_rate = c.learning_rate;
    o.sgd.momentum = c.momentum;
    o.sgd.weight_decay = c.weight_decay;
    o.sgd.schedule = c.lr_schedule;
    o.sgd.max_epochs = c.epochs;
    o.sgd.batch_size = c.batch_size;
    o.max_iterations = c.max_iterations;
    o.test_set = test_set;
    return o;
}

void train_rows(ReportBuilder& report, const std::string& placement, bool with_placement,
                const TrainStats& stats, std::size_t iters_per_epoch) {
    for (std::size_t e = 0; e < stats.epoch_train_accuracy.size(); ++e) {
        const std::size_t lo = e * iters_per_epoch;
        const std::size_t hi = std::min(stats.iteration_loss.size(), lo + iters_per_epoch);
        double mean = 0.0;
        for (std::size_t k = lo; k < hi; ++k) {
            mean += stats.iteration_loss[k];
        }
        mean = hi > lo ? mean / static_cast<double>(hi - lo) : 0.0;
        if (with_placement) {
            report.cell(placement);
        }
        report.cell(e).cell(mean).cell(stats.epoch_train_accuracy[e]);
        report.cell(stats.epoch_test_accuracy.size() > e ? fmt(stats.epoch_test_accuracy[e])
                                                         : std::string("n/a"));
        report.end_row();
    }
}

json train_summary(const TrainStats& stats) {
    json j = json::object();
    j["outcome"] = stats.outcome == TrainOutcome::kDiverged ? "diverged" : "completed";
    j["iterations"] = stats.iterations_run;
    j["epochs"] = stats.epochs_run;
    json checkpoints = json::array();
    for (double v : stats.checkpoint_mean_loss) {
        checkpoints.push_back(fmt(v));
    }
    j["checkpoint_mean_loss"] = checkpoints;
    if (!stats.epoch_test_accuracy.empty()) {
        j["final_test_accuracy"] = fmt(stats.epoch_test_accuracy.back());
    }
    return j;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& input) {
    std::ostringstream log;
    Timer total;
    log << "kind: " << input.kind << "\n";
    Setup s = resolve(input, log);
    const ExperimentConfig& c = s.config;

    json summary = json::object();
    ReportBuilder report({});

    if (c.kind == "lsuv-inspect") {
        report = ReportBuilder({"layer", "trials_used", "final_variance", "cumulative_scale",
                                "converged"});
        Timer init_timer;
        Network net = Network::build(s.specs, c.input_shape);
        Rng rng(c.seed);
        ExperimentConfig forced = c;
        forced.init = "lsuv";
        const LsuvReport lr = apply_init(net, forced, s.train_data, rng);
        log << "phase init: " << init_timer.ms() << " ms\n";
        for (const LsuvLayerReport& row : lr.layers) {
            report.cell(row.label)
                .cell(row.trials_used)
                .cell(row.final_variance)
                .cell(row.cumulative_scale)
                .cell(row.converged);
            report.end_row();
        }
        summary["all_converged"] = lr.all_converged();
    } else if (c.kind == "init-report") {
        report = ReportBuilder({"layer", "fan_in", "fan_out", "weight_std", "activation_variance"});
        Timer init_timer;
        Network net = Network::build(s.specs, c.input_shape);
        Rng rng(c.seed);
        apply_init(net, c, s.train_data, rng);
        log << "phase init: " << init_timer.ms() << " ms\n";
        const std::size_t n = std::min<std::size_t>(c.lsuv_batch, s.train_data.size());
        const Batch probe = take_batch(s.train_data, 0, n);
        net.forward(probe.images, true);
        for (std::size_t i : net.parameterized_layers()) {
            const Layer& layer = net.layer(i);
            report.cell(layer.label)
                .cell(fan_in(layer.spec))
                .cell(fan_out(layer.spec))
                .cell(stddev(layer.weights))
                .cell(variance(net.blob(i)));
            report.end_row();
        }
    } else if (c.kind == "train") {
        report = ReportBuilder({"epoch", "mean_loss", "train_accuracy", "test_accuracy"});
        Timer init_timer;
        Network net = Network::build(s.specs, c.input_shape);
        Rng rng(c.seed);
        apply_init(net, c, s.train_data, rng);
        log << "phase init: " << init_timer.ms() << " ms\n";

        Timer train_timer;
        TrainOptions options = train_options_from(c, s.has_test ? &s.test_data : nullptr);
        options.loss_checkpoint_interval = 100;
        Rng train_rng(c.seed + 1);
        const TrainStats stats = train(net, s.train_data, options, train_rng);
        log << "phase train: " << train_timer.ms() << " ms\n";

        const std::size_t iters_per_epoch =
            (s.train_data.size() + c.batch_size - 1) / c.batch_size;
        train_rows(report, "", false, stats, iters_per_epoch);
        summary = train_summary(stats);
    } else if (c.kind == "bn-placement") {
        report = ReportBuilder({"placement", "epoch", "mean_loss", "train_accuracy", "test_accuracy"});
        const std::size_t iters_per_epoch =
            (s.train_data.size() + c.batch_size - 1) / c.batch_size;
        for (std::string placement : {"before", "after"}) {
            Timer run_timer;
            ExperimentConfig variant = c;
            variant.batch_norm = true;
            variant.bn_placement = placement;
            const std::vector<LayerSpec> specs =
                make_preset(variant.preset, variant.input_shape, preset_options_from(variant));
            Network net = Network::build(specs, variant.input_shape);
            Rng rng(c.seed);
            apply_init(net, variant, s.train_data, rng);
            TrainOptions options = train_options_from(c, s.has_test ? &s.test_data : nullptr);
            Rng train_rng(c.seed + 1);
            const TrainStats stats = train(net, s.train_data, options, train_rng);
            train_rows(report, placement, true, stats, iters_per_epoch);
            summary[placement] = train_summary(stats);
            log << "phase train_" << placement << ": " << run_timer.ms() << " ms\n";
        }
    } else if (c.kind == "sweep") {
        report = ReportBuilder(
            {"scale", "outcome", "initial_loss", "final_loss", "iterations", "median_update_pct"});
        Timer sweep_timer;
        TrainOptions options = train_options_from(c, nullptr);
        const std::vector<SweepPointResult> points =
            scaling_sweep(s.specs, c.input_shape, c.scales, options, s.train_data, c.seed, c.jobs);
        log << "phase sweep: " << sweep_timer.ms() << " ms\n";
        for (const SweepPointResult& p : points) {
            std::vector<double> sorted = p.whole_net_update_magnitude;
            std::sort(sorted.begin(), sorted.end());
            const double median = sorted.empty() ? 0.0 : sorted[sorted.size() / 2];
            report.cell(p.scale)
                .cell(sweep_outcome_name(p.outcome))
                .cell(p.initial_loss)
                .cell(p.final_loss)
                .cell(p.iterations)
                .cell(median);
            report.end_row();
        }
    } else {  // batch-sensitivity
        report = ReportBuilder(
            {"batch_size", "layer", "trials_used", "final_variance", "cumulative_scale", "converged"});
        Timer sens_timer;
        LsuvOptions options;
        options.tol_var = c.tol_var;
        options.t_max = c.t_max;
        options.pre_init = parse_pre_init(c.lsuv_pre_init);
        const std::vector<BatchSensitivityResult> results =
            batch_size_sensitivity(s.specs, c.input_shape, s.train_data, c.sizes, options, c.seed);
        log << "phase batch_sensitivity: " << sens_timer.ms() << " ms\n";
        for (const BatchSensitivityResult& r : results) {
            for (const LsuvLayerReport& row : r.layers) {
                report.cell(r.size)
                    .cell(row.label)
                    .cell(row.trials_used)
                    .cell(row.final_variance)
                    .cell(row.cumulative_scale)
                    .cell(row.converged);
                report.end_row();
            }
        }
    }

    ExperimentResult result;
    result.csv = report.csv();

    json mirror = json::object();
    mirror["kind"] = c.kind;
    mirror["seed"] = c.seed;
    mirror["preset"] = c.preset;
    mirror["init"] = c.init;
    mirror["columns"] = report.columns();
    mirror["rows"] = report.rows_json();
    if (!summary.empty()) {
        mirror["summary"] = summary;
    }
    result.json = mirror.dump(2) + "\n";
    result.resolved = config_to_json(c);

    log << "total: " << total.ms() << " ms\n";
    result.log = log.str();

    namespace fs = std::filesystem;
    fs::create_directories(c.out_dir);
    const auto write = [&](const char* name, const std::string& text) {
        std::ofstream out(fs::path(c.out_dir) / name, std::ios::binary);
        if (!out) {
            throw Error(std::string("cannot write ") + name + " in " + c.out_dir);
        }
        out << text;
    };
    write("report.csv", result.csv);
    write("report.json", result.json);
    write("config.resolved.json", result.resolved);
    write("run.log", result.log);
    return result;
}

}  // namespace initlab
