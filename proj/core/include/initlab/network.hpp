#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "initlab/layers.hpp"
#include "initlab/tensor.hpp"

namespace initlab {

// Per-layer gradients from a backward pass, aligned with the network's
// layer list. Layers without parameters leave their slots empty. For
// batch-norm layers the weight/bias slots hold the scale/shift gradients.
// blob_grads (the loss gradient with respect to each layer's output blob,
// residual deposits included) is filled only on request; see backward().
struct Gradients {
    std::vector<Tensor> weight_grads;
    std::vector<Tensor> bias_grads;
    std::vector<Tensor> blob_grads;
    Tensor input_grad;
};

// A materialized layer: its spec, resolved shapes, parameters and the blob
// and routing caches filled by the last forward pass.
struct Layer {
    LayerSpec spec;
    std::string label;
    Shape in_shape;   // without the batch dimension
    Shape out_shape;  // without the batch dimension

    // Conv: [out_channels, in_channels, kh, kw]; FC: [out, in];
    // batch-norm: per-channel scale. Empty otherwise.
    Tensor weights;
    // Conv/FC bias, batch-norm shift. Empty otherwise.
    Tensor bias;

    // Maxout grouping of a parameterized layer's output: number of
    // independently initialized piece slabs (1 when no maxout follows).
    std::size_t piece_count = 1;

    // Batch-norm running statistics (momentum 0.9), used in inference mode.
    Tensor running_mean;
    Tensor running_var;

    // Caches from the last forward pass.
    Tensor output;
    std::vector<std::size_t> argmax;  // max-pool / maxout routing
    Tensor bn_xhat;
    std::vector<double> bn_inv_std;
};

// Sequential network with optional residual links. Built shape-checked with
// zero weights; initialization is a separate step (see init.hpp). A network
// is single-writer: forward/backward mutate the blob caches.
class Network {
public:
    // input_shape excludes the batch dimension: [C, H, W] or [features].
    static Network build(std::vector<LayerSpec> specs, Shape input_shape);

    // Runs all layers on a [B, ...] batch, caching every layer's output
    // blob. Requires initialized weights.
    const Tensor& forward(const Tensor& input, bool training = true);

    // Runs layers 0..last_layer inclusive, leaving deeper blobs untouched.
    // Backward requires a preceding full pass.
    const Tensor& forward_up_to(const Tensor& input, std::size_t last_layer, bool training = true);

    // Exact gradients of the forward map with respect to all parameters and
    // the input, for the batch of the last full forward pass. Pass
    // record_blob_grads to also keep every layer's output-blob gradient
    // (one extra tensor copy per layer, so off by default).
    Gradients backward(const Tensor& output_grad, bool record_blob_grads = false) const;

    // Per-layer empirical amplification sqrt(var(output)/var(input)) after
    // a forward pass on `input`. Throws DegenerateError on zero input
    // variance.
    std::vector<double> amplification_profile(const Tensor& input);

    std::size_t layer_count() const { return layers_.size(); }
    const Layer& layer(std::size_t i) const { return layers_[i]; }
    const Shape& input_shape() const { return input_shape_; }

    Tensor& weights(std::size_t i) { return layers_[i].weights; }
    Tensor& bias(std::size_t i) { return layers_[i].bias; }
    const Tensor& blob(std::size_t i) const { return layers_[i].output; }

    // Indices of conv/FC layers, in forward order.
    const std::vector<std::size_t>& parameterized_layers() const { return parameterized_; }
    // Indices of layers with SGD-updated parameters (conv/FC/batch-norm).
    const std::vector<std::size_t>& trainable_layers() const { return trainable_; }

    bool weights_initialized() const { return weights_initialized_; }
    void mark_initialized() { weights_initialized_ = true; }

    std::size_t last_batch_size() const { return last_batch_; }

private:
    Network() = default;

    const Tensor& run_layers(const Tensor& input, std::size_t upto, bool training);

    std::vector<Layer> layers_;
    std::vector<std::size_t> parameterized_;
    std::vector<std::size_t> trainable_;
    Shape input_shape_;

    Tensor input_cache_;
    std::size_t last_batch_ = 0;
    bool forward_complete_ = false;
    bool weights_initialized_ = false;
};

}  // namespace initlab
