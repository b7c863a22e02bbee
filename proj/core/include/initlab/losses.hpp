#pragma once

#include <cstddef>
#include <vector>

#include "initlab/tensor.hpp"

namespace initlab {

enum class LossKind { kSoftmaxCrossEntropy, kL2Svm };

const char* loss_kind_name(LossKind kind);

struct LossResult {
    double loss = 0.0;
    Tensor grad;  // d(loss)/d(scores), same shape as the scores
};

// Mean negative log-likelihood over the batch, softmax stabilized by
// max-subtraction. scores is [B, C]; labels holds one class index per row.
LossResult softmax_cross_entropy(const Tensor& scores, const std::vector<std::size_t>& labels);

// Mean over the batch of sum_{j != y} max(0, 1 - (s_y - s_j))^2.
LossResult l2_svm_loss(const Tensor& scores, const std::vector<std::size_t>& labels);

LossResult evaluate_loss(LossKind kind, const Tensor& scores, const std::vector<std::size_t>& labels);

}  // namespace initlab
