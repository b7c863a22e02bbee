#pragma once

#include <cstddef>
#include <string>
#include <variant>

namespace initlab {

enum class PoolMode { kMax, kAverage };

enum class ActivationKind { kRelu, kVlrelu, kTanh, kSigmoid, kMaxout };

enum class BatchNormPlacement { kBeforeNonlinearity, kAfterNonlinearity };

struct ConvSpec {
    std::size_t kernel_h = 3;
    std::size_t kernel_w = 3;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t stride = 1;
    std::size_t pad = 0;
};

struct FullyConnectedSpec {
    std::size_t in_features = 0;
    std::size_t out_features = 0;
};

struct PoolSpec {
    PoolMode mode = PoolMode::kMax;
    std::size_t kernel = 2;
    std::size_t stride = 2;
    bool global = false;  // pool over the whole spatial extent
};

struct ActivationSpec {
    ActivationKind kind = ActivationKind::kRelu;
    double slope = 0.333;    // vlrelu negative slope, in (0, 1)
    std::size_t pieces = 2;  // maxout pieces, >= 2
};

struct BatchNormSpec {
    BatchNormPlacement placement = BatchNormPlacement::kAfterNonlinearity;
    double epsilon = 1e-5;
};

// Elementwise sum of this layer's input with the cached output of an
// earlier layer (which must have the same shape).
struct ResidualAddSpec {
    std::size_t source_layer = 0;
};

using LayerSpec = std::variant<ConvSpec, FullyConnectedSpec, PoolSpec, ActivationSpec, BatchNormSpec, ResidualAddSpec>;

// Conv and fully-connected layers carry the weight tensors that
// initialization schemes act on.
bool is_parameterized(const LayerSpec& spec);

// Layers with parameters updated by SGD: conv, fully-connected, batch-norm
// (scale/shift).
bool is_trainable(const LayerSpec& spec);

std::string layer_kind_name(const LayerSpec& spec);

const char* activation_kind_name(ActivationKind kind);

}  // namespace initlab
