#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "initlab/network.hpp"
#include "initlab/rng.hpp"
#include "initlab/tensor.hpp"

namespace initlab {

// Pre-initialization used before the variance-normalization loop.
enum class LsuvPreInit { kOrthonormal, kGaussian };

struct LsuvOptions {
    double tol_var = 0.1;   // stop once |variance - 1| falls below this
    std::size_t t_max = 10; // per-layer cap on rescaling trials
    LsuvPreInit pre_init = LsuvPreInit::kOrthonormal;
};

// One row per parameterized layer, in forward order.
struct LsuvLayerReport {
    std::size_t layer_index = 0;
    std::string label;
    std::size_t trials_used = 0;     // number of rescalings applied
    double final_variance = 0.0;     // last measured output-blob variance
    double cumulative_scale = 1.0;   // product of the applied 1/sqrt(var) factors
    bool converged = false;          // |final_variance - 1| < tol_var
};

struct LsuvReport {
    std::vector<LsuvLayerReport> layers;
    bool all_converged() const;
};

// Number of input/output connections per unit. Conv: channels x kernel
// area. Throws ParameterError for layers without weights.
std::size_t fan_in(const LayerSpec& spec);
std::size_t fan_out(const LayerSpec& spec);

// All schemes fill every conv/FC weight tensor and zero the biases.
// Batch-norm scale/shift keep their build-time values (1/0).
void init_gaussian(Network& net, double std, Rng& rng);

// N(0, 1/fan_in), the fan-in-only convention.
void init_xavier(Network& net, Rng& rng);

// N(0, 2/fan_in).
void init_msra(Network& net, Rng& rng);

// Unit-variance Gaussian draw replaced by its orthonormal factor, per
// weight matrix reshaped to [out_units, fan_in]. When a maxout follows,
// each piece slab is orthonormalized independently.
void init_orthonormal(Network& net, Rng& rng);

// Layer-sequential unit-variance initialization: pre-initialize, then for
// each parameterized layer in forward order repeatedly rescale its weights
// by 1/sqrt(variance of its output blob on `batch`) until the variance is
// within tol_var of 1 or t_max trials are spent. Biases are never scaled.
// Throws DegenerateError if a layer's output variance is exactly zero.
LsuvReport lsuv(Network& net, const Tensor& batch, const LsuvOptions& options, Rng& rng);

}  // namespace initlab
