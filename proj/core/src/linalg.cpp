#include "initlab/linalg.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace initlab {

Tensor gaussian_tensor(const Shape& shape, double mean, double std, Rng& rng) {
    if (std < 0.0) {
        throw ParameterError("gaussian_tensor: std must be nonnegative");
    }
    Tensor t(shape);  // validates the shape
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = rng.normal(mean, std);
    }
    return t;
}

namespace {

// Thin Householder QR of the n x k matrix `a` (row-major, n >= k).
// Overwrites `q` with the n x k orthonormal-column factor whose triangular
// diagonal is nonnegative. Throws RankDeficientError on near rank deficiency.
void thin_qr(std::vector<double>& a, std::size_t n, std::size_t k, std::vector<double>& q) {
    std::vector<double> tau(k, 0.0);
    std::vector<double> diag(k, 0.0);

    for (std::size_t j = 0; j < k; ++j) {
        // Norm of the trailing part of column j.
        double sigma = 0.0;
        for (std::size_t i = j; i < n; ++i) {
            const double v = a[i * k + j];
            sigma += v * v;
        }
        sigma = std::sqrt(sigma);

        const double alpha = a[j * k + j];
        if (sigma == 0.0) {
            tau[j] = 0.0;
            diag[j] = 0.0;
            continue;
        }
        const double beta = (alpha >= 0.0) ? -sigma : sigma;
        tau[j] = (beta - alpha) / beta;
        const double inv = 1.0 / (alpha - beta);
        // Scale so the pivot of the reflector vector is 1; store it below
        // the diagonal in place of the annihilated entries.
        for (std::size_t i = j + 1; i < n; ++i) {
            a[i * k + j] *= inv;
        }
        a[j * k + j] = beta;
        diag[j] = beta;

        // Apply the reflector to the remaining columns.
        for (std::size_t c = j + 1; c < k; ++c) {
            double w = a[j * k + c];
            for (std::size_t i = j + 1; i < n; ++i) {
                w += a[i * k + j] * a[i * k + c];
            }
            w *= tau[j];
            a[j * k + c] -= w;
            for (std::size_t i = j + 1; i < n; ++i) {
                a[i * k + c] -= a[i * k + j] * w;
            }
        }
    }

    double max_diag = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        max_diag = std::max(max_diag, std::abs(diag[j]));
    }
    for (std::size_t j = 0; j < k; ++j) {
        if (std::abs(diag[j]) < 1e-12 * max_diag || diag[j] == 0.0) {
            throw RankDeficientError("orthonormalize: input is numerically rank-deficient (pivot " +
                                     std::to_string(j) + ")");
        }
    }

    // Accumulate Q = H_0 ... H_{k-1} * E_k by applying reflectors in reverse.
    q.assign(n * k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        q[j * k + j] = 1.0;
    }
    for (std::size_t j = k; j-- > 0;) {
        if (tau[j] == 0.0) {
            continue;
        }
        for (std::size_t c = 0; c < k; ++c) {
            double w = q[j * k + c];
            for (std::size_t i = j + 1; i < n; ++i) {
                w += a[i * k + j] * q[i * k + c];
            }
            w *= tau[j];
            q[j * k + c] -= w;
            for (std::size_t i = j + 1; i < n; ++i) {
                q[i * k + c] -= a[i * k + j] * w;
            }
        }
    }

    // Fix signs so every triangular diagonal is nonnegative.
    for (std::size_t j = 0; j < k; ++j) {
        if (diag[j] < 0.0) {
            for (std::size_t i = 0; i < n; ++i) {
                q[i * k + j] = -q[i * k + j];
            }
        }
    }
}

}  // namespace

Tensor orthonormalize(const Tensor& m) {
    if (m.rank() != 2) {
        throw ShapeError("orthonormalize: expected a rank-2 tensor, got rank " + std::to_string(m.rank()));
    }
    const std::size_t rows = m.extent(0);
    const std::size_t cols = m.extent(1);

    std::vector<double> work;
    std::vector<double> q;
    Tensor out(Shape{rows, cols});

    if (rows <= cols) {
        // Orthonormal rows: factor the transpose (cols x rows) and
        // transpose the Q factor back.
        work.resize(cols * rows);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                work[c * rows + r] = m[r * cols + c];
            }
        }
        thin_qr(work, cols, rows, q);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                out[r * cols + c] = q[c * rows + r];
            }
        }
    } else {
        work.assign(m.data(), m.data() + m.size());
        thin_qr(work, rows, cols, q);
        for (std::size_t i = 0; i < rows * cols; ++i) {
            out[i] = q[i];
        }
    }
    return out;
}

Moments moments(const Tensor& t) {
    if (t.size() < 2) {
        throw InsufficientDataError("moments: need at least 2 elements, got " + std::to_string(t.size()));
    }
    const std::size_t n = t.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += t[i];
    }
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = t[i] - mean;
        sq += d * d;
    }
    return {mean, sq / static_cast<double>(n)};
}

double variance(const Tensor& t) {
    return moments(t).variance;
}

double stddev(const Tensor& t) {
    return std::sqrt(variance(t));
}

double frobenius_norm(const Tensor& t) {
    double sq = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        sq += t[i] * t[i];
    }
    return std::sqrt(sq);
}

}  // namespace initlab
