#include "initlab/diagnostics.hpp"

#include <cmath>
#include <future>

#include "initlab/errors.hpp"
#include "initlab/linalg.hpp"
#include "initlab/losses.hpp"

namespace initlab {

std::vector<double> weight_std_report(const Network& net) {
    std::vector<double> out;
    out.reserve(net.parameterized_layers().size());
    for (std::size_t i : net.parameterized_layers()) {
        out.push_back(stddev(net.layer(i).weights));
    }
    return out;
}

VarianceReport gradient_variance_report(Network& net, const Dataset& data, LossKind loss,
                                        std::size_t n_batches, std::size_t batch_size, Rng& rng) {
    if (n_batches < 1) {
        throw ParameterError("gradient_variance_report: need at least 1 batch");
    }
    if (!net.weights_initialized()) {
        throw StateError("gradient_variance_report: network is not initialized");
    }
    const std::vector<std::size_t>& params = net.parameterized_layers();

    VarianceReport report;
    report.rows.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
        report.rows[p].layer = net.layer(params[p]).label;
        report.rows[p].weight_std = stddev(net.layer(params[p]).weights);
    }

    BatchSequence batches(data, batch_size, true, rng);
    const std::size_t available = batches.batch_count();
    for (std::size_t k = 0; k < n_batches; ++k) {
        const Batch batch = batches.batch(k % available);
        const Tensor& scores = net.forward(batch.images, true);
        const LossResult lr = evaluate_loss(loss, scores, batch.labels);
        const Gradients grads = net.backward(lr.grad, true);
        for (std::size_t p = 0; p < params.size(); ++p) {
            report.rows[p].gradient_variance += variance(grads.blob_grads[params[p]]);
            report.rows[p].activation_variance += variance(net.blob(params[p]));
        }
    }
    for (VarianceReportRow& row : report.rows) {
        row.gradient_variance /= static_cast<double>(n_batches);
        row.activation_variance /= static_cast<double>(n_batches);
    }
    if (report.rows.front().gradient_variance == 0.0) {
        throw DegenerateError("gradient_variance_report: first layer received zero gradient");
    }
    report.ratio_last_first = report.rows.back().gradient_variance / report.rows.front().gradient_variance;
    return report;
}

std::vector<double> activation_variance_report(Network& net, const Tensor& batch) {
    if (variance(batch) == 0.0) {
        throw DegenerateError("activation_variance_report: probe batch has zero variance");
    }
    net.forward(batch, true);
    std::vector<double> out;
    out.reserve(net.layer_count());
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        out.push_back(variance(net.blob(i)));
    }
    return out;
}

const char* sweep_outcome_name(SweepOutcome outcome) {
    switch (outcome) {
        case SweepOutcome::kConverged:
            return "converged";
        case SweepOutcome::kStalled:
            return "stalled";
        case SweepOutcome::kDiverged:
            return "diverged";
    }
    return "unknown";
}

namespace {

SweepPointResult run_sweep_point(const std::vector<LayerSpec>& specs, const Shape& input_shape,
                                 double scale, const TrainOptions& train_options, const Dataset& data,
                                 std::uint64_t seed) {
    if (scale <= 0.0) {
        throw ParameterError("scaling_sweep: scales must be positive");
    }
    Network net = Network::build(specs, input_shape);
    Rng init_rng(seed);
    init_orthonormal(net, init_rng);
    for (std::size_t i : net.parameterized_layers()) {
        net.weights(i).scale(scale);
    }

    TrainOptions options = train_options;
    options.record_update_magnitudes = true;

    Rng train_rng(seed + 1);
    const TrainStats stats = train(net, data, options, train_rng);

    SweepPointResult point;
    point.scale = scale;
    point.iterations = stats.iterations_run;
    point.update_magnitudes = stats.update_magnitudes;
    point.whole_net_update_magnitude = stats.whole_net_update_magnitude;
    point.initial_loss = stats.iteration_loss.empty() ? 0.0 : stats.iteration_loss.front();

    // Final loss is averaged over a short trailing window to damp
    // batch-to-batch noise in the classification.
    const std::size_t n = stats.iteration_loss.size();
    const std::size_t window = std::min<std::size_t>(10, n);
    double tail = 0.0;
    for (std::size_t k = n - window; k < n; ++k) {
        tail += stats.iteration_loss[k];
    }
    point.final_loss = window == 0 ? 0.0 : tail / static_cast<double>(window);

    if (stats.outcome == TrainOutcome::kDiverged) {
        point.outcome = SweepOutcome::kDiverged;
        point.final_loss = stats.iteration_loss.back();
    } else if (std::abs(point.final_loss - point.initial_loss) <= 0.02 * point.initial_loss) {
        point.outcome = SweepOutcome::kStalled;
    } else {
        point.outcome = SweepOutcome::kConverged;
    }
    return point;
}

}  // namespace

std::vector<SweepPointResult> scaling_sweep(const std::vector<LayerSpec>& specs,
                                            const Shape& input_shape, const std::vector<double>& scales,
                                            const TrainOptions& train_options, const Dataset& data,
                                            std::uint64_t seed, std::size_t jobs) {
    std::vector<SweepPointResult> results(scales.size());
    if (jobs <= 1) {
        for (std::size_t i = 0; i < scales.size(); ++i) {
            results[i] = run_sweep_point(specs, input_shape, scales[i], train_options, data, seed);
        }
        return results;
    }

    std::vector<std::future<SweepPointResult>> pending(scales.size());
    std::size_t next = 0;
    while (next < scales.size()) {
        const std::size_t wave = std::min(jobs, scales.size() - next);
        for (std::size_t j = 0; j < wave; ++j) {
            const double scale = scales[next + j];
            pending[next + j] = std::async(std::launch::async, [&, scale] {
                return run_sweep_point(specs, input_shape, scale, train_options, data, seed);
            });
        }
        for (std::size_t j = 0; j < wave; ++j) {
            results[next + j] = pending[next + j].get();
        }
        next += wave;
    }
    return results;
}

std::vector<BatchSensitivityResult> batch_size_sensitivity(const std::vector<LayerSpec>& specs,
                                                           const Shape& input_shape, const Dataset& data,
                                                           const std::vector<std::size_t>& sizes,
                                                           const LsuvOptions& options, std::uint64_t seed) {
    std::vector<BatchSensitivityResult> results;
    results.reserve(sizes.size());
    for (std::size_t size : sizes) {
        if (size < 2) {
            throw ParameterError("batch_size_sensitivity: estimation batch sizes must be at least 2");
        }
        if (size > data.size()) {
            throw ParameterError("batch_size_sensitivity: size " + std::to_string(size) +
                                 " exceeds the dataset (" + std::to_string(data.size()) + " samples)");
        }
        Network net = Network::build(specs, input_shape);
        Rng rng(seed);  // identical pre-init for every size
        // One seeded shuffle, replayed identically for every size, so each
        // estimation batch is the leading slice of the same representative
        // order (synthetic sets often arrive grouped by class) and equal
        // sizes see the identical batch.
        Rng order_rng(seed ^ 0x9e3779b97f4a7c15ULL);
        BatchSequence sampler(data, size, true, order_rng);
        const Batch batch = sampler.batch(0);
        const LsuvReport report = lsuv(net, batch.images, options, rng);
        results.push_back({size, report.layers});
    }
    return results;
}

}  // namespace initlab
