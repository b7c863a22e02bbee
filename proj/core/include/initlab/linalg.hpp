#pragma once

#include "initlab/rng.hpp"
#include "initlab/tensor.hpp"

namespace initlab {

// Tensor of i.i.d. normal(mean, std^2) draws. std may be zero (degenerate
// distribution, all elements equal mean).
Tensor gaussian_tensor(const Shape& shape, double mean, double std, Rng& rng);

// Orthonormal factor of a full-rank R x C matrix, computed with Householder
// QR. For R <= C the rows of the result are orthonormal, for R > C the
// columns are. The sign of each basis vector is fixed so the corresponding
// diagonal entry of the triangular factor is nonnegative, which makes the
// operation a deterministic function and idempotent on orthonormal input.
//
// Throws RankDeficientError when any triangular diagonal magnitude falls
// below 1e-12 times the largest.
Tensor orthonormalize(const Tensor& m);

struct Moments {
    double mean;
    double variance;
};

// Population mean and variance (divisor N) pooled over all elements.
// Requires at least 2 elements.
Moments moments(const Tensor& t);

// Population variance over all elements; batch, channel and spatial
// dimensions are pooled. Requires at least 2 elements.
double variance(const Tensor& t);

// Population standard deviation, sqrt(variance).
double stddev(const Tensor& t);

double frobenius_norm(const Tensor& t);

}  // namespace initlab
