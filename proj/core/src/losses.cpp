#include "initlab/losses.hpp"

#include <cmath>
#include <string>

#include "initlab/errors.hpp"

namespace initlab {

namespace {

void check_inputs(const Tensor& scores, const std::vector<std::size_t>& labels, const char* who) {
    if (scores.rank() != 2) {
        throw ShapeError(std::string(who) + ": scores must be [batch, classes]");
    }
    if (labels.size() != scores.extent(0)) {
        throw ShapeError(std::string(who) + ": got " + std::to_string(labels.size()) +
                         " labels for a batch of " + std::to_string(scores.extent(0)));
    }
    for (std::size_t y : labels) {
        if (y >= scores.extent(1)) {
            throw ParameterError(std::string(who) + ": label " + std::to_string(y) +
                                 " out of range for " + std::to_string(scores.extent(1)) + " classes");
        }
    }
}

}  // namespace

const char* loss_kind_name(LossKind kind) {
    return kind == LossKind::kSoftmaxCrossEntropy ? "softmax" : "l2svm";
}

LossResult softmax_cross_entropy(const Tensor& scores, const std::vector<std::size_t>& labels) {
    check_inputs(scores, labels, "softmax_cross_entropy");
    const std::size_t batch = scores.extent(0);
    const std::size_t classes = scores.extent(1);
    const double inv_b = 1.0 / static_cast<double>(batch);

    LossResult result;
    result.grad = Tensor::zeros(scores.shape());
    const double* s = scores.data();
    double* g = result.grad.data();

    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = s + b * classes;
        double* grow = g + b * classes;
        double m = row[0];
        for (std::size_t c = 1; c < classes; ++c) {
            m = std::max(m, row[c]);
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            grow[c] = std::exp(row[c] - m);
            sum += grow[c];
        }
        result.loss += std::log(sum) - (row[labels[b]] - m);
        const double inv_sum = 1.0 / sum;
        for (std::size_t c = 0; c < classes; ++c) {
            grow[c] *= inv_sum * inv_b;
        }
        grow[labels[b]] -= inv_b;
    }
    result.loss *= inv_b;
    return result;
}

LossResult l2_svm_loss(const Tensor& scores, const std::vector<std::size_t>& labels) {
    check_inputs(scores, labels, "l2_svm_loss");
    const std::size_t batch = scores.extent(0);
    const std::size_t classes = scores.extent(1);
    const double inv_b = 1.0 / static_cast<double>(batch);

    LossResult result;
    result.grad = Tensor::zeros(scores.shape());
    const double* s = scores.data();
    double* g = result.grad.data();

    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = s + b * classes;
        double* grow = g + b * classes;
        const std::size_t y = labels[b];
        for (std::size_t c = 0; c < classes; ++c) {
            if (c == y) {
                continue;
            }
            const double margin = 1.0 - (row[y] - row[c]);
            if (margin > 0.0) {
                result.loss += margin * margin;
                grow[c] += 2.0 * margin * inv_b;
                grow[y] -= 2.0 * margin * inv_b;
            }
        }
    }
    result.loss *= inv_b;
    return result;
}

LossResult evaluate_loss(LossKind kind, const Tensor& scores, const std::vector<std::size_t>& labels) {
    return kind == LossKind::kSoftmaxCrossEntropy ? softmax_cross_entropy(scores, labels)
                                                  : l2_svm_loss(scores, labels);
}

}  // namespace initlab
