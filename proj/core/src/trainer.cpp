#include "initlab/trainer.hpp"

#include <cmath>

#include "initlab/errors.hpp"
#include "initlab/linalg.hpp"

namespace initlab {

namespace {

bool diverged(double loss) {
    return !std::isfinite(loss) || loss > kDivergenceThreshold;
}

std::size_t count_correct(const Tensor& scores, const std::vector<std::size_t>& labels) {
    const std::size_t batch = scores.extent(0);
    const std::size_t classes = scores.extent(1);
    const double* s = scores.data();
    std::size_t correct = 0;
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = s + b * classes;
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c) {
            if (row[c] > row[best]) {
                best = c;
            }
        }
        if (best == labels[b]) {
            ++correct;
        }
    }
    return correct;
}

double pooled_norm(const Network& net) {
    double sq = 0.0;
    for (std::size_t i : net.parameterized_layers()) {
        const double n = frobenius_norm(net.layer(i).weights);
        sq += n * n;
    }
    return std::sqrt(sq);
}

}  // namespace

TrainStats train(Network& net, const Dataset& data, const TrainOptions& options, Rng& rng) {
    validate(options.sgd);
    if (!net.weights_initialized()) {
        throw StateError("train: network is not initialized");
    }

    TrainStats stats;
    Velocity velocity = make_velocity(net);
    double lr = options.sgd.learning_rate;
    std::size_t schedule_pos = 0;

    std::vector<Tensor> before;
    const std::vector<std::size_t>& params = net.parameterized_layers();

    double window_loss = 0.0;
    std::size_t window_count = 0;

    for (std::size_t epoch = 0; epoch < options.sgd.max_epochs; ++epoch) {
        while (schedule_pos < options.sgd.schedule.size() &&
               options.sgd.schedule[schedule_pos].first == epoch) {
            lr *= options.sgd.schedule[schedule_pos].second;
            ++schedule_pos;
        }

        BatchSequence batches(data, options.sgd.batch_size, options.shuffle, rng);
        std::size_t epoch_correct = 0;

        for (std::size_t k = 0; k < batches.batch_count(); ++k) {
            const Batch batch = batches.batch(k);
            const Tensor& scores = net.forward(batch.images, true);
            const LossResult loss = evaluate_loss(options.loss, scores, batch.labels);

            stats.iteration_loss.push_back(loss.loss);
            epoch_correct += count_correct(scores, batch.labels);
            if (diverged(loss.loss)) {
                stats.outcome = TrainOutcome::kDiverged;
                stats.epochs_run = epoch;
                return stats;
            }

            if (options.loss_checkpoint_interval > 0) {
                window_loss += loss.loss;
                ++window_count;
                if (window_count == options.loss_checkpoint_interval) {
                    stats.checkpoint_mean_loss.push_back(window_loss / window_count);
                    window_loss = 0.0;
                    window_count = 0;
                }
            }

            double norm_before = 0.0;
            if (options.record_update_magnitudes) {
                before.clear();
                for (std::size_t li : params) {
                    before.push_back(net.layer(li).weights);
                }
                norm_before = pooled_norm(net);
            }

            const Gradients grads = net.backward(loss.grad);
            SgdConfig step_config = options.sgd;
            step_config.learning_rate = lr;
            sgd_step(net, grads, step_config, velocity);
            ++stats.iterations_run;

            if (options.record_update_magnitudes) {
                std::vector<Tensor> after;
                for (std::size_t li : params) {
                    after.push_back(net.layer(li).weights);
                }
                stats.update_magnitudes.push_back(update_magnitude(before, after));
                double sq = 0.0;
                for (std::size_t li = 0; li < params.size(); ++li) {
                    for (std::size_t e = 0; e < before[li].size(); ++e) {
                        const double d = after[li][e] - before[li][e];
                        sq += d * d;
                    }
                }
                stats.whole_net_update_magnitude.push_back(norm_before == 0.0
                                                               ? 0.0
                                                               : 100.0 * std::sqrt(sq) / norm_before);
            }

            if (options.max_iterations > 0 && stats.iterations_run >= options.max_iterations) {
                stats.epoch_train_accuracy.push_back(
                    static_cast<double>(epoch_correct) /
                    static_cast<double>((k + 1) * options.sgd.batch_size < data.size()
                                            ? (k + 1) * options.sgd.batch_size
                                            : data.size()));
                stats.epochs_run = epoch + 1;
                if (options.test_set != nullptr) {
                    stats.epoch_test_accuracy.push_back(
                        evaluate_accuracy(net, *options.test_set, options.eval_batch_size));
                }
                return stats;
            }
        }

        stats.epoch_train_accuracy.push_back(static_cast<double>(epoch_correct) /
                                             static_cast<double>(data.size()));
        if (options.test_set != nullptr) {
            stats.epoch_test_accuracy.push_back(
                evaluate_accuracy(net, *options.test_set, options.eval_batch_size));
        }
        stats.epochs_run = epoch + 1;
        if (options.stop_at_test_accuracy > 0.0 && !stats.epoch_test_accuracy.empty() &&
            stats.epoch_test_accuracy.back() >= options.stop_at_test_accuracy) {
            break;
        }
    }
    return stats;
}

double evaluate_accuracy(Network& net, const Dataset& data, std::size_t batch_size) {
    if (batch_size < 1) {
        throw ParameterError("evaluate_accuracy: batch size must be at least 1");
    }
    std::size_t correct = 0;
    for (std::size_t first = 0; first < data.size(); first += batch_size) {
        const std::size_t count = std::min(batch_size, data.size() - first);
        const Batch batch = take_batch(data, first, count);
        const Tensor& scores = net.forward(batch.images, false);
        correct += count_correct(scores, batch.labels);
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace initlab
