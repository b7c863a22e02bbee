#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "initlab/layers.hpp"
#include "initlab/tensor.hpp"

namespace initlab {

// Everything a run depends on, with string-typed enums so the struct maps
// 1:1 onto the JSON config format. parse_config fills unlisted fields with
// the defaults below; config_to_json writes every field back out, so a
// resolved config round-trips losslessly.
struct ExperimentConfig {
    std::string kind = "lsuv-inspect";  // train | init-report | sweep | lsuv-inspect |
                                        // bn-placement | batch-sensitivity
    std::uint64_t seed = 1;
    std::string out_dir = "runs/latest";

    // dataset
    std::string dataset = "blobs";  // blobs | mnist
    std::string data_dir;           // empty: $INITLAB_DATA_DIR, then "data/mnist"
    std::size_t blob_per_class = 128;  // blobs draw n_classes * blob_per_class samples
    double blob_separation = 4.0;
    Shape input_shape;  // empty: preset default (blobs) or file shape (mnist)

    // network
    std::string preset = "fitnet4-desk";  // preset name, or "inline" with `layers`
    std::vector<LayerSpec> layers;        // used only when preset == "inline"
    std::string activation = "relu";      // relu | vlrelu | tanh | sigmoid | maxout
    double vlrelu_slope = 0.333;
    std::size_t conv_pieces = 2;
    std::size_t fc_pieces = 5;
    bool batch_norm = false;
    std::string bn_placement = "before";  // before | after
    std::size_t n_classes = 10;
    std::vector<std::size_t> mlp_hidden = {64, 32};

    // init
    std::string init = "lsuv";  // gaussian | xavier | msra | ortho | lsuv
    double gaussian_std = 0.01;
    double tol_var = 0.1;
    std::size_t t_max = 10;
    std::string lsuv_pre_init = "ortho";  // ortho | gaussian
    std::size_t lsuv_batch = 256;

    // optimizer
    std::string loss = "softmax";  // softmax | l2svm
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::size_t epochs = 1;
    std::size_t batch_size = 128;
    std::vector<std::pair<std::size_t, double>> lr_schedule;  // (epoch, multiplier)
    std::size_t max_iterations = 0;                           // 0 = epoch-bounded

    // kind-specific
    std::vector<double> scales = {0.0625, 0.25, 1.0, 4.0, 16.0};
    std::vector<std::size_t> sizes = {2, 16, 32, 128, 1024};
    std::size_t jobs = 1;
};

// Parses and validates; throws ConfigError naming the offending field.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

// Serializes every field in a fixed order. parse_config(config_to_json(c))
// reproduces c exactly.
std::string config_to_json(const ExperimentConfig& config);

void validate(const ExperimentConfig& config);

struct ExperimentResult {
    std::string csv;       // report.csv contents
    std::string json;      // report.json contents
    std::string resolved;  // config.resolved.json contents
    std::string log;       // run.log contents (includes wall-clock timings)
};

// Executes the configured experiment and writes report.csv, report.json,
// config.resolved.json and run.log into config.out_dir. Timings appear only
// in the log, so reports are bit-identical across re-runs.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace initlab
