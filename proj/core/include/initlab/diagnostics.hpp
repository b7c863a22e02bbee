#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "initlab/dataset.hpp"
#include "initlab/init.hpp"
#include "initlab/network.hpp"
#include "initlab/trainer.hpp"

namespace initlab {

// Population std of each parameterized layer's weight tensor, forward order.
std::vector<double> weight_std_report(const Network& net);

struct VarianceReportRow {
    std::string layer;
    double weight_std = 0.0;
    double activation_variance = 0.0;  // output blob on the probe batches, averaged
    // Variance of the loss gradient with respect to the layer's output blob,
    // averaged over batches. (Weight-gradient variance is nearly depth-flat
    // because forward activation decay and backward signal decay cancel in
    // the outer product; the blob gradient is what actually shrinks or
    // explodes with depth.)
    double gradient_variance = 0.0;
};

struct VarianceReport {
    std::vector<VarianceReportRow> rows;  // one per parameterized layer
    // gradient variance of the last parameterized layer over the first's.
    double ratio_last_first = 0.0;
};

// Runs forward+backward on n_batches seeded mini-batches and averages the
// per-layer output-blob gradient variances (and activation variances) over
// them.
VarianceReport gradient_variance_report(Network& net, const Dataset& data, LossKind loss,
                                        std::size_t n_batches, std::size_t batch_size, Rng& rng);

// Per-layer output-blob variance for every layer (not only parameterized
// ones) after one training-mode forward pass on `batch`.
std::vector<double> activation_variance_report(Network& net, const Tensor& batch);

enum class SweepOutcome { kConverged, kStalled, kDiverged };

const char* sweep_outcome_name(SweepOutcome outcome);

struct SweepPointResult {
    double scale = 1.0;
    SweepOutcome outcome = SweepOutcome::kConverged;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::size_t iterations = 0;
    // Percent magnitudes, [iteration][parameterized layer].
    std::vector<std::vector<double>> update_magnitudes;
    std::vector<double> whole_net_update_magnitude;
};

// For each scale: orthonormal-initialize a fresh network from `specs` with
// the same seed, multiply all weights by the scale, train briefly, and
// classify the outcome: diverged (non-finite or huge loss), stalled (final
// loss within 2% of the initial loss), converged (anything else).
// `jobs` > 1 runs sweep points concurrently; results are ordered by scale
// index either way.
std::vector<SweepPointResult> scaling_sweep(const std::vector<LayerSpec>& specs,
                                            const Shape& input_shape, const std::vector<double>& scales,
                                            const TrainOptions& train_options, const Dataset& data,
                                            std::uint64_t seed, std::size_t jobs = 1);

struct BatchSensitivityResult {
    std::size_t size = 0;
    std::vector<LsuvLayerReport> layers;
};

// Runs LSUV once per estimation-batch size over identical pre-inits (same
// seed each time). Each estimation batch is the first `size` entries of one
// seeded shuffle of the dataset, so batches are nested, class-representative
// draws regardless of the dataset's storage order, and equal sizes reuse the
// identical batch.
std::vector<BatchSensitivityResult> batch_size_sensitivity(const std::vector<LayerSpec>& specs,
                                                           const Shape& input_shape, const Dataset& data,
                                                           const std::vector<std::size_t>& sizes,
                                                           const LsuvOptions& options, std::uint64_t seed);

}  // namespace initlab
