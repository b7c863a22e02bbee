#include "initlab/sgd.hpp"

#include <cmath>
#include <string>

#include "initlab/errors.hpp"
#include "initlab/linalg.hpp"

namespace initlab {

void validate(const SgdConfig& config) {
    if (config.learning_rate <= 0.0) {
        throw ConfigError("sgd: learning rate must be positive");
    }
    if (config.momentum < 0.0 || config.momentum >= 1.0) {
        throw ConfigError("sgd: momentum must lie in [0, 1)");
    }
    if (config.weight_decay < 0.0) {
        throw ConfigError("sgd: weight decay must be nonnegative");
    }
    if (config.batch_size < 1) {
        throw ConfigError("sgd: batch size must be at least 1");
    }
    for (std::size_t k = 0; k < config.schedule.size(); ++k) {
        if (k > 0 && config.schedule[k].first <= config.schedule[k - 1].first) {
            throw ConfigError("sgd: schedule epochs must be strictly increasing");
        }
        if (config.schedule[k].second <= 0.0) {
            throw ConfigError("sgd: schedule multipliers must be positive");
        }
    }
}

Velocity make_velocity(const Network& net) {
    Velocity v;
    v.weights.resize(net.layer_count());
    v.biases.resize(net.layer_count());
    for (std::size_t i : net.trainable_layers()) {
        v.weights[i] = Tensor::zeros(net.layer(i).weights.shape());
        v.biases[i] = Tensor::zeros(net.layer(i).bias.shape());
    }
    return v;
}

namespace {

void step_tensor(Tensor& param, const Tensor& grad, Tensor& vel, double lr, double momentum,
                 double weight_decay) {
    if (grad.shape() != param.shape()) {
        throw ShapeError("sgd_step: gradient shape does not match parameter shape");
    }
    double* w = param.data();
    const double* g = grad.data();
    double* v = vel.data();
    for (std::size_t k = 0; k < param.size(); ++k) {
        const double gk = g[k] + weight_decay * w[k];
        v[k] = momentum * v[k] - lr * gk;
        w[k] += v[k];
    }
}

}  // namespace

void sgd_step(Network& net, const Gradients& grads, const SgdConfig& config, Velocity& velocity) {
    if (grads.weight_grads.size() < net.layer_count() ||
        grads.bias_grads.size() < net.layer_count()) {
        throw StateError("sgd_step: gradients do not cover the network (run backward first)");
    }
    for (std::size_t i : net.trainable_layers()) {
        if (grads.weight_grads[i].empty()) {
            throw StateError("sgd_step: missing gradient for layer " + net.layer(i).label);
        }
        step_tensor(net.weights(i), grads.weight_grads[i], velocity.weights[i], config.learning_rate,
                    config.momentum, config.weight_decay);
        step_tensor(net.bias(i), grads.bias_grads[i], velocity.biases[i], config.learning_rate,
                    config.momentum, config.weight_decay);
    }
}

std::vector<double> update_magnitude(const std::vector<Tensor>& before,
                                     const std::vector<Tensor>& after) {
    if (before.size() != after.size()) {
        throw ShapeError("update_magnitude: mismatched layer counts");
    }
    std::vector<double> out;
    out.reserve(before.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
        if (!before[i].same_shape(after[i])) {
            throw ShapeError("update_magnitude: tensor " + std::to_string(i) + " changed shape");
        }
        const double base = frobenius_norm(before[i]);
        if (base == 0.0) {
            throw DegenerateError("update_magnitude: zero-norm reference tensor " + std::to_string(i));
        }
        double sq = 0.0;
        for (std::size_t k = 0; k < before[i].size(); ++k) {
            const double d = after[i][k] - before[i][k];
            sq += d * d;
        }
        out.push_back(100.0 * std::sqrt(sq) / base);
    }
    return out;
}

}  // namespace initlab
