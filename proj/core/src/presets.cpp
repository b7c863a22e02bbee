#include "initlab/presets.hpp"

#include "initlab/errors.hpp"

namespace initlab {

namespace {

// Incremental builder tracking the running channel count and the index of
// the most recent activation layer (residual links sum with that blob).
struct Builder {
    std::vector<LayerSpec> specs;
    const PresetOptions& opt;
    std::size_t channels;
    std::size_t last_activation = static_cast<std::size_t>(-1);

    Builder(const PresetOptions& options, std::size_t in_channels) : opt(options), channels(in_channels) {}

    ActivationSpec activation(std::size_t pieces) const {
        ActivationSpec a;
        a.kind = opt.activation;
        a.slope = opt.vlrelu_slope;
        a.pieces = pieces;
        return a;
    }

    void add_bn(BatchNormPlacement where) {
        if (opt.batch_norm && opt.bn_placement == where) {
            BatchNormSpec bn;
            bn.placement = where;
            specs.push_back(bn);
        }
    }

    void add_nonlinearity(std::size_t pieces) {
        add_bn(BatchNormPlacement::kBeforeNonlinearity);
        specs.push_back(activation(pieces));
        last_activation = specs.size() - 1;
        add_bn(BatchNormPlacement::kAfterNonlinearity);
    }

    // conv 3x3 pad 1 + nonlinearity; widened when the nonlinearity is a
    // maxout over pieces.
    void conv3x3(std::size_t width, bool with_sum = false) {
        const bool maxout = opt.activation == ActivationKind::kMaxout;
        const std::size_t pieces = maxout ? opt.conv_pieces : 1;
        ConvSpec c;
        c.kernel_h = c.kernel_w = 3;
        c.in_channels = channels;
        c.out_channels = width * pieces;
        c.stride = 1;
        c.pad = 1;
        specs.push_back(c);
        if (with_sum) {
            ResidualAddSpec sum;
            sum.source_layer = last_activation;
            specs.push_back(sum);
        }
        if (maxout) {
            add_nonlinearity(opt.conv_pieces);
        } else {
            add_nonlinearity(1);
        }
        channels = width;
    }

    void pool(std::size_t kernel, std::size_t stride) {
        PoolSpec p;
        p.mode = PoolMode::kMax;
        p.kernel = kernel;
        p.stride = stride;
        specs.push_back(p);
    }

    void global_pool() {
        PoolSpec p;
        p.mode = PoolMode::kMax;
        p.global = true;
        specs.push_back(p);
    }

    void fc(std::size_t in_features, std::size_t width, bool hidden) {
        const bool maxout = hidden && opt.activation == ActivationKind::kMaxout;
        const std::size_t pieces = maxout ? opt.fc_pieces : 1;
        FullyConnectedSpec f;
        f.in_features = in_features;
        f.out_features = width * pieces;
        specs.push_back(f);
        if (hidden) {
            add_nonlinearity(pieces);
        }
        channels = width;
    }
};

void require_chw(const std::string& name, const Shape& input_shape) {
    if (input_shape.size() != 3) {
        throw ParameterError(name + ": expects a [channels, height, width] input shape");
    }
}

std::size_t spatial_after(std::size_t extent, std::size_t kernel, std::size_t stride) {
    return (extent - kernel) / stride + 1;
}

// Three double-conv blocks with shrinking pools, then a linear classifier;
// roughly 30K parameters at the default widths.
std::vector<LayerSpec> fitnet_mnist(const Shape& input_shape, const PresetOptions& opt) {
    require_chw("fitnet-mnist", input_shape);
    Builder b(opt, input_shape[0]);
    std::size_t h = input_shape[1];
    std::size_t w = input_shape[2];

    b.conv3x3(16);
    b.conv3x3(16);
    b.pool(4, 2);
    h = spatial_after(h, 4, 2);
    w = spatial_after(w, 4, 2);

    b.conv3x3(16);
    b.conv3x3(16);
    b.pool(4, 2);
    h = spatial_after(h, 4, 2);
    w = spatial_after(w, 4, 2);

    b.conv3x3(12);
    b.conv3x3(12);
    b.pool(2, 2);
    h = spatial_after(h, 2, 2);
    w = spatial_after(w, 2, 2);

    b.fc(12 * h * w, opt.n_classes, false);
    return b.specs;
}

// Seventeen parameterized layers in three five-conv blocks plus two FC
// layers, sized for small (8x8-ish) inputs so full sweeps finish in
// seconds. `residual` adds a sum after the 2nd and 4th conv of each block,
// joining the output of the previous nonlinearity.
std::vector<LayerSpec> fitnet4_desk(const Shape& input_shape, const PresetOptions& opt, bool residual) {
    const std::string name = residual ? "fitresnet4-desk" : "fitnet4-desk";
    require_chw(name, input_shape);
    if (residual && opt.activation == ActivationKind::kMaxout) {
        // The summed conv output is piece-widened while the source
        // activation is not, so the shapes cannot match.
        throw ParameterError(name + ": maxout is not compatible with the residual links");
    }
    Builder b(opt, input_shape[0]);
    std::size_t h = input_shape[1];
    std::size_t w = input_shape[2];

    // The residual variant moves the first block's width change one conv
    // earlier, so that each sum joins two equal-width blobs.
    const std::size_t widths[3][5] = {{8, 8, 8, 12, 12}, {20, 20, 20, 20, 20}, {32, 32, 32, 32, 32}};
    const std::size_t residual_first[5] = {8, 8, 12, 12, 12};
    for (std::size_t block = 0; block < 3; ++block) {
        for (std::size_t k = 0; k < 5; ++k) {
            const bool with_sum = residual && (k == 1 || k == 3);
            const std::size_t width =
                residual && block == 0 ? residual_first[k] : widths[block][k];
            b.conv3x3(width, with_sum);
        }
        if (block < 2) {
            b.pool(2, 2);
            h = spatial_after(h, 2, 2);
            w = spatial_after(w, 2, 2);
        } else {
            b.global_pool();
            h = w = 1;
        }
    }

    b.fc(32 * h * w, 125, true);
    b.fc(125, opt.n_classes, false);
    return b.specs;
}

// Plain FC stack over the flattened input.
std::vector<LayerSpec> mlp(const Shape& input_shape, const PresetOptions& opt) {
    Builder b(opt, input_shape[0]);
    std::size_t features = shape_size(input_shape);
    for (std::size_t width : opt.mlp_hidden) {
        b.fc(features, width, true);
        features = width;
    }
    b.fc(features, opt.n_classes, false);
    return b.specs;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"fitnet-mnist", "fitnet4-desk", "fitresnet4-desk", "mlp"};
}

Shape preset_default_input(const std::string& name) {
    if (name == "fitnet-mnist") {
        return {1, 28, 28};
    }
    if (name == "fitnet4-desk" || name == "fitresnet4-desk") {
        return {3, 8, 8};
    }
    if (name == "mlp") {
        return {16};
    }
    std::string valid;
    for (const std::string& n : preset_names()) {
        valid += valid.empty() ? n : ", " + n;
    }
    throw ConfigError("unknown preset '" + name + "' (valid presets: " + valid + ")");
}

std::vector<LayerSpec> make_preset(const std::string& name, const Shape& input_shape,
                                   const PresetOptions& options) {
    if (options.n_classes < 2) {
        throw ParameterError(name + ": need at least 2 classes");
    }
    if (name == "fitnet-mnist") {
        return fitnet_mnist(input_shape, options);
    }
    if (name == "fitnet4-desk") {
        return fitnet4_desk(input_shape, options, false);
    }
    if (name == "fitresnet4-desk") {
        return fitnet4_desk(input_shape, options, true);
    }
    if (name == "mlp") {
        return mlp(input_shape, options);
    }
    preset_default_input(name);  // throws with the valid-name list
    return {};
}

}  // namespace initlab
