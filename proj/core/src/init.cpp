#include "initlab/init.hpp"

#include <cmath>

#include "initlab/errors.hpp"
#include "initlab/linalg.hpp"

namespace initlab {

namespace {

// Fills one layer's weights with N(0, std^2) draws and zeroes the bias.
void fill_layer_gaussian(Network& net, std::size_t i, double std, Rng& rng) {
    Tensor& w = net.weights(i);
    for (double& v : w) {
        v = rng.normal(0.0, std);
    }
    net.bias(i).fill(0.0);
}

void per_fan_in_gaussian(Network& net, double numerator, Rng& rng) {
    for (std::size_t i : net.parameterized_layers()) {
        const double std = std::sqrt(numerator / static_cast<double>(fan_in(net.layer(i).spec)));
        fill_layer_gaussian(net, i, std, rng);
    }
    net.mark_initialized();
}

}  // namespace

bool LsuvReport::all_converged() const {
    for (const LsuvLayerReport& row : layers) {
        if (!row.converged) {
            return false;
        }
    }
    return true;
}

std::size_t fan_in(const LayerSpec& spec) {
    if (const auto* c = std::get_if<ConvSpec>(&spec)) {
        return c->in_channels * c->kernel_h * c->kernel_w;
    }
    if (const auto* f = std::get_if<FullyConnectedSpec>(&spec)) {
        return f->in_features;
    }
    throw ParameterError("fan_in: layer has no weight tensor");
}

std::size_t fan_out(const LayerSpec& spec) {
    if (const auto* c = std::get_if<ConvSpec>(&spec)) {
        return c->out_channels * c->kernel_h * c->kernel_w;
    }
    if (const auto* f = std::get_if<FullyConnectedSpec>(&spec)) {
        return f->out_features;
    }
    throw ParameterError("fan_out: layer has no weight tensor");
}

void init_gaussian(Network& net, double std, Rng& rng) {
    if (std <= 0.0) {
        throw ParameterError("init_gaussian: std must be positive");
    }
    for (std::size_t i : net.parameterized_layers()) {
        fill_layer_gaussian(net, i, std, rng);
    }
    net.mark_initialized();
}

void init_xavier(Network& net, Rng& rng) {
    per_fan_in_gaussian(net, 1.0, rng);
}

void init_msra(Network& net, Rng& rng) {
    per_fan_in_gaussian(net, 2.0, rng);
}

void init_orthonormal(Network& net, Rng& rng) {
    for (std::size_t i : net.parameterized_layers()) {
        const Layer& layer = net.layer(i);
        const std::size_t fin = fan_in(layer.spec);
        Tensor& w = net.weights(i);
        const std::size_t out_units = w.size() / fin;
        const std::size_t pieces = layer.piece_count;
        const std::size_t slab_rows = out_units / pieces;

        // The weight tensor is row-major [out_units, fan_in] once conv
        // filters are flattened, so piece slabs are contiguous row blocks.
        for (std::size_t p = 0; p < pieces; ++p) {
            Tensor q;
            for (int attempt = 0;; ++attempt) {
                try {
                    q = orthonormalize(gaussian_tensor({slab_rows, fin}, 0.0, 1.0, rng));
                    break;
                } catch (const RankDeficientError&) {
                    if (attempt >= 3) {
                        throw;
                    }
                }
            }
            double* dst = w.data() + p * slab_rows * fin;
            const double* src = q.data();
            for (std::size_t k = 0; k < slab_rows * fin; ++k) {
                dst[k] = src[k];
            }
        }
        net.bias(i).fill(0.0);
    }
    net.mark_initialized();
}

LsuvReport lsuv(Network& net, const Tensor& batch, const LsuvOptions& options, Rng& rng) {
    if (options.tol_var <= 0.0) {
        throw ParameterError("lsuv: tol_var must be positive");
    }
    if (options.t_max < 1) {
        throw ParameterError("lsuv: t_max must be at least 1");
    }
    if (batch.rank() < 2 || batch.extent(0) < 2) {
        throw ParameterError("lsuv: estimation batch needs at least 2 samples");
    }

    if (options.pre_init == LsuvPreInit::kOrthonormal) {
        init_orthonormal(net, rng);
    } else {
        init_xavier(net, rng);  // N(0, 1/fan_in) keeps the start in the rescaling basin
    }

    LsuvReport report;
    for (std::size_t li : net.parameterized_layers()) {
        LsuvLayerReport row;
        row.layer_index = li;
        row.label = net.layer(li).label;

        // Later layers cannot influence this blob, so the forward pass is
        // truncated at the layer under adjustment.
        for (;;) {
            net.forward_up_to(batch, li);
            const double v = variance(net.blob(li));
            if (v == 0.0) {
                throw DegenerateError("lsuv: layer " + row.label + " produced zero output variance");
            }
            row.final_variance = v;
            if (std::abs(v - 1.0) < options.tol_var) {
                row.converged = true;
                break;
            }
            if (row.trials_used >= options.t_max) {
                break;  // unconverged; the caller decides what to do
            }
            const double scale = 1.0 / std::sqrt(v);
            net.weights(li).scale(scale);
            row.cumulative_scale *= scale;
            ++row.trials_used;
        }
        report.layers.push_back(std::move(row));
    }
    return report;
}

}  // namespace initlab
