#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "initlab/network.hpp"

namespace initlab {

struct SgdConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;      // classical momentum, in [0, 1)
    double weight_decay = 0.0;  // optional L2 term added to the gradient
    // (epoch, multiplier) pairs with strictly increasing epochs; on reaching
    // such an epoch the learning rate is multiplied by the factor.
    std::vector<std::pair<std::size_t, double>> schedule;
    std::size_t max_epochs = 1;
    std::size_t batch_size = 128;
};

void validate(const SgdConfig& config);

// Momentum buffers, one slot per network layer (empty for layers without
// trainable parameters).
struct Velocity {
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
};

Velocity make_velocity(const Network& net);

// v <- momentum * v - lr * g ; w <- w + v, applied to every trainable
// layer present in grads. config.learning_rate is the effective rate for
// this step (schedules are resolved by the caller).
void sgd_step(Network& net, const Gradients& grads, const SgdConfig& config, Velocity& velocity);

// Per-entry 100 * ||after - before||_F / ||before||_F. Throws
// DegenerateError when a `before` entry has zero norm.
std::vector<double> update_magnitude(const std::vector<Tensor>& before,
                                     const std::vector<Tensor>& after);

}  // namespace initlab
