#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "initlab/layers.hpp"
#include "initlab/tensor.hpp"

namespace initlab {

struct PresetOptions {
    ActivationKind activation = ActivationKind::kRelu;
    double vlrelu_slope = 0.333;
    std::size_t conv_pieces = 2;  // maxout pieces in conv stages
    std::size_t fc_pieces = 5;    // maxout pieces in hidden FC stages
    bool batch_norm = false;
    BatchNormPlacement bn_placement = BatchNormPlacement::kBeforeNonlinearity;
    std::size_t n_classes = 10;
    std::vector<std::size_t> mlp_hidden = {64, 32};
};

// Known presets: fitnet-mnist, fitnet4-desk, fitresnet4-desk, mlp.
std::vector<std::string> preset_names();

// Natural input shape each preset is sized for.
Shape preset_default_input(const std::string& name);

// Builds the preset's layer list for the given input shape. Throws
// ConfigError for unknown names (message lists the valid ones) and
// ParameterError for unsupported combinations.
std::vector<LayerSpec> make_preset(const std::string& name, const Shape& input_shape,
                                   const PresetOptions& options);

}  // namespace initlab
