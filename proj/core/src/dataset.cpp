#include "initlab/dataset.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

#include "initlab/errors.hpp"

namespace initlab {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw FormatError(path + ": truncated header");
    }
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::string hex(std::uint32_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s = "0x";
    for (int shift = 28; shift >= 0; shift -= 4) {
        s += digits[(v >> shift) & 0xf];
    }
    return s;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError(path + ": cannot open file");
    }
    return in;
}

}  // namespace

Shape Dataset::sample_shape() const {
    Shape s(images.shape().begin() + 1, images.shape().end());
    return s;
}

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs = open_input(images_path);
    const std::uint32_t img_magic = read_u32_be(imgs, images_path);
    if (img_magic != kImageMagic) {
        throw FormatError(images_path + ": expected image magic " + hex(kImageMagic) + ", found " +
                          hex(img_magic));
    }
    const std::uint32_t n = read_u32_be(imgs, images_path);
    const std::uint32_t rows = read_u32_be(imgs, images_path);
    const std::uint32_t cols = read_u32_be(imgs, images_path);
    if (n == 0 || rows == 0 || cols == 0) {
        throw FormatError(images_path + ": zero-sized dimension in header");
    }

    const std::size_t n_pixels = std::size_t(n) * rows * cols;
    std::vector<unsigned char> pixels(n_pixels);
    if (!imgs.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(n_pixels))) {
        throw FormatError(images_path + ": payload shorter than header promises");
    }

    std::ifstream labs = open_input(labels_path);
    const std::uint32_t lab_magic = read_u32_be(labs, labels_path);
    if (lab_magic != kLabelMagic) {
        throw FormatError(labels_path + ": expected label magic " + hex(kLabelMagic) + ", found " +
                          hex(lab_magic));
    }
    const std::uint32_t n_labels = read_u32_be(labs, labels_path);
    if (n_labels != n) {
        throw FormatError(labels_path + ": " + std::to_string(n_labels) + " labels for " +
                          std::to_string(n) + " images");
    }
    std::vector<unsigned char> raw_labels(n_labels);
    if (!labs.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(n_labels))) {
        throw FormatError(labels_path + ": payload shorter than header promises");
    }

    Dataset ds;
    ds.images = Tensor::zeros({n, 1, rows, cols});
    double* out = ds.images.data();
    for (std::size_t i = 0; i < n_pixels; ++i) {
        out[i] = pixels[i] / 255.0;
    }
    ds.labels.assign(raw_labels.begin(), raw_labels.end());
    std::size_t max_label = 0;
    for (std::size_t y : ds.labels) {
        max_label = std::max(max_label, y);
    }
    ds.n_classes = max_label + 1;
    return ds;
}

void write_mnist_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
    if (ds.images.rank() != 4 || ds.images.extent(1) != 1) {
        throw ShapeError("write_mnist_idx: dataset images must be [N,1,H,W]");
    }
    std::ofstream imgs(images_path, std::ios::binary);
    if (!imgs) {
        throw FormatError(images_path + ": cannot open file for writing");
    }
    write_u32_be(imgs, kImageMagic);
    write_u32_be(imgs, static_cast<std::uint32_t>(ds.images.extent(0)));
    write_u32_be(imgs, static_cast<std::uint32_t>(ds.images.extent(2)));
    write_u32_be(imgs, static_cast<std::uint32_t>(ds.images.extent(3)));
    for (double v : ds.images) {
        const long q = std::lround(v * 255.0);
        imgs.put(static_cast<char>(std::min(255L, std::max(0L, q))));
    }

    std::ofstream labs(labels_path, std::ios::binary);
    if (!labs) {
        throw FormatError(labels_path + ": cannot open file for writing");
    }
    write_u32_be(labs, kLabelMagic);
    write_u32_be(labs, static_cast<std::uint32_t>(ds.labels.size()));
    for (std::size_t y : ds.labels) {
        labs.put(static_cast<char>(y));
    }
}

Dataset synthetic_blobs(std::size_t n_classes, const Shape& sample_shape, std::size_t n_per_class,
                        double separation, Rng& rng) {
    if (n_classes < 2) {
        throw ParameterError("synthetic_blobs: need at least 2 classes");
    }
    if (n_per_class == 0) {
        throw ParameterError("synthetic_blobs: n_per_class must be positive");
    }
    if (separation <= 0.0) {
        throw ParameterError("synthetic_blobs: separation must be positive");
    }
    const std::size_t dim = shape_size(sample_shape);

    // Centers are drawn from N(0, separation^2 I); in dimension d their
    // typical pairwise distance is separation * sqrt(2d), so the constraint
    // below (distance >= separation * cluster std, with cluster std 1)
    // almost always holds at the first attempt.
    std::vector<std::vector<double>> centers;
    for (std::size_t c = 0; c < n_classes; ++c) {
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            std::vector<double> cand(dim);
            for (double& x : cand) {
                x = rng.normal(0.0, separation);
            }
            placed = true;
            for (const std::vector<double>& other : centers) {
                double sq = 0.0;
                for (std::size_t k = 0; k < dim; ++k) {
                    const double d = cand[k] - other[k];
                    sq += d * d;
                }
                if (std::sqrt(sq) < separation) {
                    placed = false;
                    break;
                }
            }
            if (placed) {
                centers.push_back(std::move(cand));
            }
        }
        if (!placed) {
            throw GenerationError("synthetic_blobs: could not place " + std::to_string(n_classes) +
                                  " centers at separation " + std::to_string(separation));
        }
    }

    const std::size_t n = n_classes * n_per_class;
    Shape full_shape;
    full_shape.push_back(n);
    full_shape.insert(full_shape.end(), sample_shape.begin(), sample_shape.end());

    Dataset ds;
    ds.n_classes = n_classes;
    ds.images = Tensor::zeros(full_shape);
    ds.labels.resize(n);

    // Rescale so per-coordinate variance is about 1: coordinates are a
    // center draw N(0, separation^2) plus unit cluster noise. Separability
    // is a ratio of distances, so it survives the global rescale.
    const double scale = 1.0 / std::sqrt(separation * separation + 1.0);
    double* out = ds.images.data();
    std::size_t idx = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::size_t s = 0; s < n_per_class; ++s, ++idx) {
            ds.labels[idx] = c;
            double* sample = out + idx * dim;
            for (std::size_t k = 0; k < dim; ++k) {
                sample[k] = (centers[c][k] + rng.normal()) * scale;
            }
        }
    }
    return ds;
}

BatchSequence::BatchSequence(const Dataset& ds, std::size_t batch_size, bool shuffle, Rng& rng)
    : ds_(&ds), batch_size_(batch_size) {
    if (batch_size < 1) {
        throw ParameterError("batches: batch size must be at least 1");
    }
    if (ds.size() == 0) {
        throw ParameterError("batches: dataset is empty");
    }
    order_.resize(ds.size());
    for (std::size_t i = 0; i < order_.size(); ++i) {
        order_[i] = i;
    }
    if (shuffle) {
        for (std::size_t i = order_.size() - 1; i > 0; --i) {
            std::swap(order_[i], order_[rng.below(i + 1)]);
        }
    }
}

std::size_t BatchSequence::batch_count() const {
    return (ds_->size() + batch_size_ - 1) / batch_size_;
}

Batch BatchSequence::batch(std::size_t k) const {
    const std::size_t first = k * batch_size_;
    if (first >= ds_->size()) {
        throw ParameterError("batches: batch index out of range");
    }
    const std::size_t count = std::min(batch_size_, ds_->size() - first);
    const std::size_t dim = shape_size(ds_->sample_shape());

    Shape shape;
    shape.push_back(count);
    const Shape sample = ds_->sample_shape();
    shape.insert(shape.end(), sample.begin(), sample.end());

    Batch b;
    b.images = Tensor::zeros(shape);
    b.labels.resize(count);
    const double* src = ds_->images.data();
    double* dst = b.images.data();
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t s = order_[first + i];
        b.labels[i] = ds_->labels[s];
        const double* from = src + s * dim;
        for (std::size_t k2 = 0; k2 < dim; ++k2) {
            dst[i * dim + k2] = from[k2];
        }
    }
    return b;
}

Batch take_batch(const Dataset& ds, std::size_t first, std::size_t count) {
    if (first + count > ds.size()) {
        throw ParameterError("take_batch: range exceeds dataset size");
    }
    const std::size_t dim = shape_size(ds.sample_shape());
    Shape shape;
    shape.push_back(count);
    const Shape sample = ds.sample_shape();
    shape.insert(shape.end(), sample.begin(), sample.end());

    Batch b;
    b.images = Tensor::zeros(shape);
    b.labels.assign(ds.labels.begin() + static_cast<std::ptrdiff_t>(first),
                    ds.labels.begin() + static_cast<std::ptrdiff_t>(first + count));
    const double* src = ds.images.data() + first * dim;
    double* dst = b.images.data();
    for (std::size_t k = 0; k < count * dim; ++k) {
        dst[k] = src[k];
    }
    return b;
}

}  // namespace initlab
