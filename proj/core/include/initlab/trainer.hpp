#pragma once

#include <cstddef>
#include <vector>

#include "initlab/dataset.hpp"
#include "initlab/losses.hpp"
#include "initlab/network.hpp"
#include "initlab/rng.hpp"
#include "initlab/sgd.hpp"

namespace initlab {

enum class TrainOutcome { kCompleted, kDiverged };

struct TrainOptions {
    LossKind loss = LossKind::kSoftmaxCrossEntropy;
    SgdConfig sgd;
    bool shuffle = true;
    // Stop after this many weight updates regardless of epochs (0 = no cap);
    // used by short probe runs.
    std::size_t max_iterations = 0;
    // Record per-parameterized-layer relative update magnitudes (percent)
    // for every iteration. Costly: implies one weight snapshot per step.
    bool record_update_magnitudes = false;
    // Record the mean training loss over each window of this many
    // iterations (0 = off).
    std::size_t loss_checkpoint_interval = 0;
    // When set, evaluated after every epoch.
    const Dataset* test_set = nullptr;
    std::size_t eval_batch_size = 256;
    // Stop early once the post-epoch test accuracy reaches this fraction
    // (0 = never). Requires test_set.
    double stop_at_test_accuracy = 0.0;
};

struct TrainStats {
    std::vector<double> iteration_loss;
    std::vector<double> epoch_train_accuracy;  // over the epoch's training batches, pre-update
    std::vector<double> epoch_test_accuracy;
    // [iteration][parameterized layer], percent; filled only when requested.
    std::vector<std::vector<double>> update_magnitudes;
    std::vector<double> whole_net_update_magnitude;  // percent, all weights pooled
    std::vector<double> checkpoint_mean_loss;
    TrainOutcome outcome = TrainOutcome::kCompleted;
    std::size_t iterations_run = 0;
    std::size_t epochs_run = 0;
};

// Loss above this, or any non-finite loss, halts training with
// TrainOutcome::kDiverged.
inline constexpr double kDivergenceThreshold = 1e6;

// Mini-batch SGD with momentum over config.max_epochs epochs of seeded
// shuffling. Deterministic for a fixed seed.
TrainStats train(Network& net, const Dataset& data, const TrainOptions& options, Rng& rng);

// Fraction of samples whose argmax score matches the label.
double evaluate_accuracy(Network& net, const Dataset& data, std::size_t batch_size);

}  // namespace initlab
