#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "initlab/rng.hpp"
#include "initlab/tensor.hpp"

namespace initlab {

// Immutable after construction; freely shareable between runs.
struct Dataset {
    Tensor images;  // [N, C, H, W] or [N, features], values in [0, 1] for file-backed data
    std::vector<std::size_t> labels;
    std::size_t n_classes = 0;

    std::size_t size() const { return labels.size(); }
    // Per-sample shape, without the leading N.
    Shape sample_shape() const;
};

// Reads the big-endian IDX pair used by MNIST (magic 0x00000803 for images,
// 0x00000801 for labels) and scales pixels to [0, 1].
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// Inverse of load_mnist_idx for [N,1,H,W] datasets whose values are exact
// multiples of 1/255 (quantizes by rounding otherwise).
void write_mnist_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path);

// Gaussian clusters (unit std before normalization) at random centers with
// pairwise center distance at least separation * cluster-std. The whole
// dataset is scaled so per-coordinate variance is near 1, which preserves
// the separation/std ratio. Deterministic per seed.
Dataset synthetic_blobs(std::size_t n_classes, const Shape& sample_shape, std::size_t n_per_class,
                        double separation, Rng& rng);

struct Batch {
    Tensor images;
    std::vector<std::size_t> labels;
};

// One epoch's worth of mini-batches over a seeded Fisher-Yates permutation
// (or the original order when shuffle is off). The final partial batch is
// included.
class BatchSequence {
public:
    BatchSequence(const Dataset& ds, std::size_t batch_size, bool shuffle, Rng& rng);

    std::size_t batch_count() const;
    Batch batch(std::size_t k) const;
    const std::vector<std::size_t>& order() const { return order_; }

private:
    const Dataset* ds_;
    std::size_t batch_size_;
    std::vector<std::size_t> order_;
};

// Copies samples [first, first + count) in dataset order into one batch.
Batch take_batch(const Dataset& ds, std::size_t first, std::size_t count);

}  // namespace initlab
